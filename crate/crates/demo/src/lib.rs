//! Browser bindings: a live Metropolis chain in d = 2, the exact free-energy
//! curve of a small instance and the local-time rate function.

use wasm_bindgen::prelude::*;

use polyq::charges::derive_seed;
use polyq::exact::ExactGibbs;
use polyq::mcmc::{initial_walk, Chain, Init};
use polyq::rate::rate_i;
use polyq::structure::{detect_events, max_energy_formula};
use polyq::{ChargeLaw, ChargeVector, GibbsSpec, Walk};

/// Paths allowed in one exact curve; 4^11 at N = 12 in d = 2.
const DEMO_BUDGET: u64 = 1 << 22;

fn law(name: &str) -> Result<ChargeLaw, String> {
    name.parse().map_err(|e: polyq::PolyqError| e.to_string())
}

/// A running chain on Z² with its frozen charges.
#[wasm_bindgen]
pub struct Polymer {
    chain: Chain,
    q: ChargeVector,
    n: usize,
    alpha: f64,
    sweeps: u64,
}

impl Polymer {
    pub fn create(n: usize, beta: f64, charges: &str, seed: u64, window_rate: f64) -> Result<Polymer, String> {
        let spec = GibbsSpec::new(2, n, beta, law(charges)?, seed).map_err(|e| e.to_string())?;
        let q = spec.charges().map_err(|e| e.to_string())?;
        let w = initial_walk(&spec, &q, Init::Hot, derive_seed(seed, 1)).map_err(|e| e.to_string())?;
        let mut chain = Chain::new(&spec, &q, &w, derive_seed(seed, 2)).map_err(|e| e.to_string())?;
        chain.set_window_rate(window_rate.clamp(0.0, 1.0));
        Ok(Polymer {
            chain,
            q,
            n,
            alpha: 0.25,
            sweeps: 0,
        })
    }

    fn walk(&self) -> Walk {
        self.chain.walk()
    }
}

#[wasm_bindgen]
impl Polymer {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, beta: f64, charges: &str, seed: u64, window_rate: f64) -> Result<Polymer, JsError> {
        Polymer::create(n, beta, charges, seed, window_rate).map_err(|e| JsError::new(&e))
    }

    /// Runs `k` sweeps.
    pub fn advance(&mut self, k: u32) {
        for _ in 0..k {
            self.chain.sweep();
        }
        self.sweeps += k as u64;
    }

    /// x0, y0, x1, y1, ... relative to the first monomer.
    pub fn positions(&self) -> Vec<i32> {
        self.chain
            .relative_positions()
            .iter()
            .flat_map(|s| [s.0[0], s.0[1]])
            .collect()
    }

    pub fn charges(&self) -> Vec<f64> {
        self.q.as_slice().to_vec()
    }

    /// H_N / N².
    pub fn energy(&self) -> f64 {
        self.chain.energy() / (self.n * self.n) as f64
    }

    /// The maximal H_N / N² for these charges.
    pub fn max_energy(&self) -> f64 {
        max_energy_formula(&self.q) / (self.n * self.n) as f64
    }

    pub fn max_local_time(&self) -> u32 {
        self.chain.max_local_time()
    }

    pub fn diameter(&self) -> u32 {
        self.walk().diameter()
    }

    /// Whether the current path is in S_α (α = 1/4).
    pub fn folded(&self) -> bool {
        detect_events(&self.q, &self.walk(), self.alpha).map_or(false, |e| e.s_alpha)
    }

    pub fn sweeps(&self) -> f64 {
        self.sweeps as f64
    }
}

pub fn free_energy_points(d: usize, n: usize, charges: &str, seed: u64, beta_max: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 || !(beta_max > 0.0) {
        return Err("need at least two points and beta_max > 0".into());
    }
    let spec = GibbsSpec::new(d, n, 0.0, law(charges)?, seed).map_err(|e| e.to_string())?;
    let q = spec.charges().map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let b = beta_max * k as f64 / (points - 1) as f64;
        let g = ExactGibbs::with_budget(&spec.with_beta(b), &q, DEMO_BUDGET).map_err(|e| e.to_string())?;
        out.push(b);
        out.push(g.log_partition() / n as f64);
    }
    Ok(out)
}

/// β0, F0, β1, F1, ... for F_N(β) = N⁻¹ ln Z_N(β) by enumeration.
#[wasm_bindgen]
pub fn free_energy_curve(d: usize, n: usize, charges: &str, seed: u64, beta_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    free_energy_points(d, n, charges, seed, beta_max, points).map_err(|e| JsError::new(&e))
}

pub fn rate_points(d: usize, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 {
        return Err("need at least two points".into());
    }
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let eps = 0.01 + 0.48 * k as f64 / (points - 1) as f64;
        let p = rate_i(eps, d).map_err(|e| e.to_string())?;
        out.push(eps);
        out.push(p.rate);
    }
    Ok(out)
}

/// ε0, I0, ε1, I1, ... on (0, 1/2).
#[wasm_bindgen]
pub fn rate_curve(d: usize, points: usize) -> Result<Vec<f64>, JsError> {
    rate_points(d, points).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polymer_stays_a_walk() {
        let mut p = Polymer::create(30, 3.0, "rademacher", 4, 0.2).unwrap();
        p.advance(50);
        let xy = p.positions();
        assert_eq!(xy.len(), 60);
        assert_eq!(&xy[..2], &[0, 0]);
        for k in 1..30 {
            let step = (xy[2 * k] - xy[2 * k - 2]).abs() + (xy[2 * k + 1] - xy[2 * k - 1]).abs();
            assert_eq!(step, 1);
        }
        assert!(p.energy() > 0.0 && p.energy() <= p.max_energy());
        assert_eq!(p.sweeps(), 50.0);
    }

    #[test]
    fn free_energy_curve_starts_at_zero_and_rises() {
        let c = free_energy_points(2, 8, "rademacher", 1, 4.0, 5).unwrap();
        assert_eq!(c.len(), 10);
        assert_eq!((c[0], c[1]), (0.0, 0.0));
        assert!(c.chunks(2).zip(c.chunks(2).skip(1)).all(|(a, b)| b[1] > a[1]));
        assert!(free_energy_points(3, 40, "rademacher", 1, 1.0, 3).is_err());
        assert!(free_energy_points(2, 8, "nonsense", 1, 1.0, 3).is_err());
    }

    #[test]
    fn rate_curve_is_increasing() {
        let c = rate_points(2, 6).unwrap();
        assert!(c.chunks(2).zip(c.chunks(2).skip(1)).all(|(a, b)| b[1] > a[1]));
    }
}
