//! The enumeration engine against a deliberately naive evaluator: an odometer
//! over step sequences, a BTreeMap for the occupation field and plain sums.

use std::collections::BTreeMap;
use std::sync::Arc;

use polyq::exact::{
    endpoint_law, gibbs_expectation, max_gap_probability, quenched_partition, truncated_partition,
    tv_distance, ExactGibbs, Observable,
};
use polyq::{ChargeLaw, ChargeVector, GibbsSpec};

fn unit(k: usize, d: usize) -> Vec<i32> {
    let mut v = vec![0; d];
    v[k / 2] = if k % 2 == 0 { 1 } else { -1 };
    v
}

/// Calls `f(positions)` on every walk with N monomers.
fn each_walk(d: usize, n: usize, mut f: impl FnMut(&[Vec<i32>])) {
    let mut digits = vec![0usize; n - 1];
    loop {
        let mut pos = vec![vec![0; d]];
        for &k in &digits {
            let u = unit(k, d);
            let last = pos.last().unwrap();
            pos.push(last.iter().zip(&u).map(|(a, b)| a + b).collect());
        }
        f(&pos);
        let mut i = 0;
        loop {
            if i == digits.len() {
                return;
            }
            digits[i] += 1;
            if digits[i] < 2 * d {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn naive_energy(q: &[f64], pos: &[Vec<i32>]) -> f64 {
    let mut m: BTreeMap<&Vec<i32>, f64> = BTreeMap::new();
    for (x, &c) in pos.iter().zip(q) {
        *m.entry(x).or_insert(0.0) += c;
    }
    m.values().map(|v| v * v).sum()
}

fn naive_partition(d: usize, beta: f64, q: &[f64]) -> f64 {
    let n = q.len();
    let mut z = 0.0;
    let mut count = 0.0;
    each_walk(d, n, |p| {
        z += (beta * naive_energy(q, p) / n as f64).exp();
        count += 1.0;
    });
    z / count
}

#[test]
fn partition_matches_naive_evaluator() {
    let spec = GibbsSpec::new(2, 8, 1.0, ChargeLaw::Rademacher, 42).unwrap();
    let q = spec.charges().unwrap();
    let z = quenched_partition(&spec, &q).unwrap();
    let r = naive_partition(2, 1.0, q.as_slice());
    assert!((z - r).abs() <= 1e-10 * r, "{z} vs {r}");
}

#[test]
fn partition_matches_naive_evaluator_gaussian_3d() {
    let spec = GibbsSpec::new(3, 6, 2.5, ChargeLaw::Gaussian, 3).unwrap();
    let q = spec.charges().unwrap();
    let z = quenched_partition(&spec, &q).unwrap();
    let r = naive_partition(3, 2.5, q.as_slice());
    assert!((z - r).abs() <= 1e-10 * r);
}

#[test]
fn first_step_is_uniform_at_beta_zero() {
    let spec = GibbsSpec::new(2, 6, 0.0, ChargeLaw::Rademacher, 1).unwrap();
    let q = spec.charges().unwrap();
    let p = gibbs_expectation(&spec, &q, &Observable::FirstStep(polyq::Step(0))).unwrap();
    assert!((p - 0.25).abs() < 1e-14);
    let c = gibbs_expectation(&spec, &q, &Observable::Custom(Arc::new(|_, _| 3.5))).unwrap();
    assert!((c - 3.5).abs() < 1e-12);
}

#[test]
fn mean_energy_is_the_derivative_of_free_energy() {
    let q = GibbsSpec::new(2, 8, 0.0, ChargeLaw::Rademacher, 42).unwrap().charges().unwrap();
    for beta in [0.5, 2.0] {
        let spec = GibbsSpec::new(2, 8, beta, ChargeLaw::Rademacher, 42).unwrap();
        let h = 1e-4;
        let f = |b: f64| ExactGibbs::new(&spec.with_beta(b), &q).unwrap().log_partition() / 8.0;
        let fd = (f(beta + h) - f(beta - h)) / (2.0 * h);
        let e = gibbs_expectation(&spec, &q, &Observable::EnergyOverN2).unwrap();
        assert!((fd - e).abs() < 1e-6, "beta={beta}: {fd} vs {e}");
    }
}

#[test]
fn truncation_properties() {
    let spec = GibbsSpec::new(2, 7, 1.5, ChargeLaw::Rademacher, 8).unwrap();
    let q = spec.charges().unwrap();
    let z = quenched_partition(&spec, &q).unwrap();
    let full = truncated_partition(&spec, &q, 4.0 / 7.0).unwrap();
    assert!((full - z).abs() <= 1e-12 * z);
    assert_eq!(truncated_partition(&spec, &q, 0.1).unwrap(), 0.0);
    let mut prev = 0.0;
    for k in 1..=8 {
        let v = truncated_partition(&spec, &q, k as f64 / 8.0).unwrap();
        assert!(v >= prev && v <= z * (1.0 + 1e-12));
        prev = v;
    }
}

#[test]
fn total_variation_shrinks_with_n_at_small_beta() {
    let mut prev = f64::INFINITY;
    for n in [4, 6, 8] {
        let spec = GibbsSpec::new(2, n, 0.1, ChargeLaw::Rademacher, 42).unwrap();
        let q = spec.charges().unwrap();
        let tv = tv_distance(&spec, &q).unwrap();
        assert!(tv < 0.2 && tv < prev, "N={n}: {tv}");
        prev = tv;
    }
    let spec = GibbsSpec::new(2, 6, 0.0, ChargeLaw::Rademacher, 42).unwrap();
    assert!(tv_distance(&spec, &spec.charges().unwrap()).unwrap() < 1e-14);
}

#[test]
fn endpoint_tv_is_below_path_tv() {
    let spec = GibbsSpec::new(1, 8, 0.2, ChargeLaw::Rademacher, 4).unwrap();
    let q = spec.charges().unwrap();
    let law = endpoint_law(&spec, &q).unwrap();
    let free = endpoint_law(&spec.with_beta(0.0), &q).unwrap();
    let mass: f64 = law.values().sum();
    assert!((mass - 1.0).abs() < 1e-12);
    let tv: f64 = free.iter().map(|(k, p)| (p - law.get(k).unwrap_or(&0.0)).abs()).sum::<f64>() / 2.0;
    assert!(tv <= tv_distance(&spec, &q).unwrap() + 1e-15);
    // simple-walk endpoint law: binomial on {-7, -5, ..., 7}
    for (x, p) in &free {
        let k = ((x.0[0] + 7) / 2) as u32;
        let c = (0..k).fold(1.0, |a, j| a * (7 - j) as f64 / (j + 1) as f64);
        assert!((p - c / 128.0).abs() < 1e-14);
    }
}

#[test]
fn max_gap_lemma_holds_exactly() {
    let q = GibbsSpec::new(2, 7, 0.0, ChargeLaw::Rademacher, 5).unwrap().charges().unwrap();
    for beta in [1.0, 5.0, 20.0] {
        for eps in [0.05, 0.1, 0.3] {
            let spec = GibbsSpec::new(2, 7, beta, ChargeLaw::Rademacher, 5).unwrap();
            let (p, bound) = max_gap_probability(&spec, &q, eps).unwrap();
            assert!(p <= bound + 1e-15, "beta={beta} eps={eps}: {p} > {bound}");
        }
    }
}

#[test]
fn interaction_weights_give_the_same_measure() {
    let spec = GibbsSpec::new(2, 7, 1.2, ChargeLaw::Gaussian, 6).unwrap();
    let q = spec.charges().unwrap();
    let g = ExactGibbs::new(&spec, &q).unwrap();
    let obs = [Observable::LstarOverN, Observable::Diameter, Observable::EnergyOverN2];
    let a = g.expectations(&obs);
    let b = g.expectations_interaction(&obs);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn one_monomer_partition() {
    let spec = GibbsSpec::new(2, 1, 0.3, ChargeLaw::Rademacher, 0).unwrap();
    let q = ChargeVector::new(vec![2.0]);
    assert!((quenched_partition(&spec, &q).unwrap() - 1.2f64.exp()).abs() < 1e-12);
}
