//! Local times, site charges and the deterministic energy observables.

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::charges::{ChargeVector, Sign};
use crate::error::{PolyqError, Result};
use crate::lattice::{Parity, Site, Walk};
use crate::stats::neumaier_sum;

/// Local time L^x and total charge Q^x of one visited site.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct SiteData {
    pub local_time: u32,
    pub charge: f64,
}

/// site → (L^x, Q^x) over visited sites only.
#[derive(Clone, Debug, Default)]
pub struct OccupationField {
    sites: FxHashMap<Site, SiteData>,
    n: usize,
}

impl OccupationField {
    pub fn get(&self, x: &Site) -> Option<&SiteData> {
        self.sites.get(x)
    }

    /// Q^x, zero for unvisited sites.
    pub fn charge_at(&self, x: &Site) -> f64 {
        self.sites.get(x).map_or(0.0, |s| s.charge)
    }

    pub fn local_time_at(&self, x: &Site) -> u32 {
        self.sites.get(x).map_or(0, |s| s.local_time)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, &SiteData)> {
        self.sites.iter()
    }

    /// Visited sites in lexicographic order.
    pub fn sorted_sites(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.sites.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn n_visited(&self) -> usize {
        self.sites.len()
    }

    /// Number of monomers N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// H_N = Σ_x (Q^x)².
    pub fn energy(&self) -> f64 {
        let mut v: Vec<(Site, f64)> = self.sites.iter().map(|(k, s)| (*k, s.charge)).collect();
        v.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        neumaier_sum(v.into_iter().map(|(_, q)| q * q))
    }

    /// L*_N = max_x L^x.
    pub fn max_local_time(&self) -> u32 {
        self.sites.values().map(|s| s.local_time).max().unwrap_or(0)
    }
}

pub fn occupation(q: &ChargeVector, w: &Walk) -> Result<OccupationField> {
    q.check_len(w.len())?;
    Ok(occupation_of(q.as_slice(), w.positions()))
}

/// Field of charges placed at positions (lengths must agree).
pub fn occupation_of(q: &[f64], positions: &[Site]) -> OccupationField {
    debug_assert_eq!(q.len(), positions.len());
    let mut sites: FxHashMap<Site, SiteData> = FxHashMap::default();
    sites.reserve(positions.len());
    for (x, &qi) in positions.iter().zip(q) {
        let e = sites.entry(*x).or_default();
        e.local_time += 1;
        e.charge += qi;
    }
    OccupationField {
        sites,
        n: positions.len(),
    }
}

pub fn energy(q: &ChargeVector, w: &Walk) -> Result<f64> {
    Ok(occupation(q, w)?.energy())
}

/// Ĥ_N = Σ_{i<j} q_i q_j 1{S_i = S_j}, accumulated with running per-site sums.
pub fn interaction_energy(q: &ChargeVector, w: &Walk) -> Result<f64> {
    q.check_len(w.len())?;
    let mut running: FxHashMap<Site, f64> = FxHashMap::default();
    let mut acc = crate::stats::Neumaier::default();
    for (x, &qj) in w.positions().iter().zip(q.as_slice()) {
        let r = running.entry(*x).or_insert(0.0);
        acc.add(qj * *r);
        *r += qj;
    }
    Ok(acc.value())
}

/// Q_ε^p: total |charge| of sign ε at time indices of parity p.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct ParitySignSums {
    pub plus_even: f64,
    pub minus_even: f64,
    pub plus_odd: f64,
    pub minus_odd: f64,
}

impl ParitySignSums {
    pub fn get(&self, e: Sign, p: Parity) -> f64 {
        match (e, p) {
            (Sign::Plus, Parity::Even) => self.plus_even,
            (Sign::Minus, Parity::Even) => self.minus_even,
            (Sign::Plus, Parity::Odd) => self.plus_odd,
            (Sign::Minus, Parity::Odd) => self.minus_odd,
        }
    }

    fn slot(&mut self, e: Sign, p: Parity) -> &mut f64 {
        match (e, p) {
            (Sign::Plus, Parity::Even) => &mut self.plus_even,
            (Sign::Minus, Parity::Even) => &mut self.minus_even,
            (Sign::Plus, Parity::Odd) => &mut self.plus_odd,
            (Sign::Minus, Parity::Odd) => &mut self.minus_odd,
        }
    }

    /// ΣΣ (Q_ε^p)², the maximal energy for d ≥ 2.
    pub fn square_sum(&self) -> f64 {
        [self.plus_even, self.minus_even, self.plus_odd, self.minus_odd]
            .iter()
            .map(|x| x * x)
            .sum()
    }

    /// Σ of all four entries, i.e. Σ|q_i|.
    pub fn total(&self) -> f64 {
        self.plus_even + self.minus_even + self.plus_odd + self.minus_odd
    }

    /// min_{ε,p} (Q_ε^p)², the empirical Γ.
    pub fn gamma(&self) -> f64 {
        [self.plus_even, self.minus_even, self.plus_odd, self.minus_odd]
            .iter()
            .map(|x| x * x)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn parity_sign_sums(q: &ChargeVector) -> ParitySignSums {
    parity_sign_sums_of(q.as_slice(), 0)
}

/// Same, for a slice whose first element has time index `offset`.
pub fn parity_sign_sums_of(q: &[f64], offset: usize) -> ParitySignSums {
    let mut s = ParitySignSums::default();
    for (k, &x) in q.iter().enumerate() {
        let p = Parity::of_index(k + offset);
        let e = Sign::of(x);
        *s.slot(e, p) += e.part(x);
    }
    s
}

/// q̄_L = min over ℓ ≥ L and 0 ≤ i < N-ℓ of the mean of |q_i|, ..., |q_{i+ℓ-1}|.
/// Returns +∞ when no window qualifies (L = N).
pub fn qbar(q: &ChargeVector, l: usize) -> Result<f64> {
    let n = q.len();
    if l == 0 || l > n {
        return Err(PolyqError::BadWindow { window: l, n });
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for x in q.as_slice() {
        let last = *prefix.last().unwrap();
        prefix.push(last + x.abs());
    }
    let mut best = f64::INFINITY;
    for len in l..n {
        for i in 0..n - len {
            best = best.min((prefix[i + len] - prefix[i]) / len as f64);
        }
    }
    Ok(best)
}

/// Charges and walk of monomers N1..N, re-anchored at S_{N1}.
pub fn suffix_instance(q: &ChargeVector, w: &Walk, n1: usize) -> Result<(ChargeVector, Walk)> {
    q.check_len(w.len())?;
    if n1 == 0 || n1 >= w.len() {
        return Err(PolyqError::OutOfRange(format!(
            "split point {n1} not in 1..{}",
            w.len()
        )));
    }
    let tail = Walk::reanchored(w.d(), &w.positions()[n1..])?;
    Ok((q.slice(n1, q.len()), tail))
}

/// Checks H_N/N ≤ H_{N1}/N1 + H̃_{N2}/N2 in the multiplied-out form
/// N1·N2·H ≤ N·(N2·H1 + N1·H2), which is exact for integer charges.
/// Returns (lhs, rhs).
pub fn subadditivity_sides(q: &ChargeVector, w: &Walk, n1: usize) -> Result<(f64, f64)> {
    let h = energy(q, w)?;
    let head = Walk::from_positions(w.d(), w.positions()[..n1].to_vec())?;
    let h1 = energy(&q.slice(0, n1), &head)?;
    let (q2, tail) = suffix_instance(q, w, n1)?;
    let h2 = energy(&q2, &tail)?;
    let n = w.len() as f64;
    let (a, b) = (n1 as f64, (w.len() - n1) as f64);
    Ok((a * b * h, n * (b * h1 + a * h2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Step;

    fn d1(pos: &[i32]) -> Walk {
        Walk::from_positions(1, pos.iter().map(|&x| Site([x, 0, 0, 0])).collect()).unwrap()
    }

    #[test]
    fn hand_example() {
        let q = ChargeVector::new(vec![1.0, -1.0, 1.0]);
        let w = d1(&[0, 1, 0]);
        let f = occupation(&q, &w).unwrap();
        assert_eq!(f.n_visited(), 2);
        let o = f.get(&Site::ORIGIN).unwrap();
        assert_eq!((o.local_time, o.charge), (2, 2.0));
        let one = f.get(&Site([1, 0, 0, 0])).unwrap();
        assert_eq!((one.local_time, one.charge), (1, -1.0));
        assert_eq!(f.energy(), 5.0);
        assert_eq!(interaction_energy(&q, &w).unwrap(), 1.0);
        assert_eq!(f.max_local_time(), 2);
    }

    #[test]
    fn single_monomer() {
        let q = ChargeVector::new(vec![-0.5]);
        let w = Walk::straight(2, 1).unwrap();
        let f = occupation(&q, &w).unwrap();
        assert_eq!(f.get(&Site::ORIGIN).unwrap().charge, -0.5);
        assert_eq!(f.energy(), 0.25);
    }

    #[test]
    fn zero_charges_give_zero_energy() {
        let q = ChargeVector::new(vec![0.0; 5]);
        let w = Walk::from_steps(2, vec![Step(0), Step(1), Step(2), Step(3)]).unwrap();
        let f = occupation(&q, &w).unwrap();
        assert_eq!(f.energy(), 0.0);
        assert_eq!(f.iter().map(|(_, s)| s.local_time).sum::<u32>(), 5);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let q = ChargeVector::new(vec![1.0; 4]);
        let w = Walk::straight(2, 3).unwrap();
        assert!(matches!(
            occupation(&q, &w),
            Err(PolyqError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn parity_sums_example() {
        let q = ChargeVector::new(vec![1.0, -1.0, 1.0, -1.0]);
        let s = parity_sign_sums(&q);
        assert_eq!(
            (s.plus_even, s.minus_even, s.plus_odd, s.minus_odd),
            (2.0, 0.0, 0.0, 2.0)
        );
        let pos = ChargeVector::new(vec![0.5, 2.0, 1.0]);
        let s = parity_sign_sums(&pos);
        assert_eq!((s.minus_even, s.minus_odd), (0.0, 0.0));
    }

    #[test]
    fn qbar_examples() {
        assert_eq!(qbar(&ChargeVector::new(vec![1.0, -1.0, 1.0, -1.0]), 2).unwrap(), 1.0);
        assert_eq!(qbar(&ChargeVector::new(vec![0.0, 0.0, 1.0, 1.0]), 2).unwrap(), 0.0);
        assert_eq!(qbar(&ChargeVector::new(vec![1.0; 3]), 3).unwrap(), f64::INFINITY);
        assert!(matches!(
            qbar(&ChargeVector::new(vec![1.0; 3]), 4),
            Err(PolyqError::BadWindow { .. })
        ));
    }

    #[test]
    fn subadditivity_on_a_fold() {
        let q = ChargeVector::new(vec![1.0, -1.0, 1.0, -1.0, 1.0, 1.0]);
        let w = Walk::from_steps(2, vec![Step(0), Step(1), Step(0), Step(1), Step(2)]).unwrap();
        for n1 in 1..6 {
            let (lhs, rhs) = subadditivity_sides(&q, &w, n1).unwrap();
            assert!(lhs <= rhs, "n1={n1}: {lhs} > {rhs}");
        }
    }
}
