//! Folded-phase structure: argmax sites, distance to optimality, optimal
//! trajectories, unit-square events and the window rewiring map.

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::charges::{ChargeVector, Sign};
use crate::error::{PolyqError, Result};
use crate::field::{occupation, occupation_of, parity_sign_sums, qbar, OccupationField, ParitySignSums};
use crate::lattice::{Parity, Site, Walk};

fn si(e: Sign) -> usize {
    match e {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

fn pi(p: Parity) -> usize {
    match p {
        Parity::Even => 0,
        Parity::Odd => 1,
    }
}

/// The four sites x_ε^p.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArgmaxPoints {
    sites: [[Site; 2]; 2],
    charges: [[f64; 2]; 2],
    degenerate: [[bool; 2]; 2],
}

impl ArgmaxPoints {
    pub fn get(&self, e: Sign, p: Parity) -> Site {
        self.sites[si(e)][pi(p)]
    }

    /// Q^{x_ε^p}.
    pub fn charge(&self, e: Sign, p: Parity) -> f64 {
        self.charges[si(e)][pi(p)]
    }

    /// Set on ties and whenever the maximum is not attained at a visited
    /// site with ε·Q > 0.
    pub fn is_degenerate(&self, e: Sign, p: Parity) -> bool {
        self.degenerate[si(e)][pi(p)]
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().flatten().any(|&b| b)
    }

    /// Whether monomer i at `x` with charge `qi` sits on its optimal site.
    pub fn is_optimal(&self, i: usize, x: &Site, qi: f64) -> bool {
        let p = Parity::of_index(i);
        if qi == 0.0 {
            *x == self.get(Sign::Plus, p) || *x == self.get(Sign::Minus, p)
        } else {
            *x == self.get(Sign::of(qi), p)
        }
    }

    /// All four cross-parity pairs are at L¹ distance 1.
    pub fn cross_adjacent(&self) -> bool {
        Sign::BOTH.iter().all(|&a| {
            Sign::BOTH
                .iter()
                .all(|&b| self.get(a, Parity::Odd).l1_dist(&self.get(b, Parity::Even)) == 1)
        })
    }
}

/// For each (ε, p), the parity-p site maximising ε·Q^x. When every visited
/// parity-p site has ε·Q^x < 0, the lexicographically smallest unvisited
/// parity-p neighbour of the visited set is used instead (Q = 0).
pub fn argmax_points(field: &OccupationField, d: usize) -> ArgmaxPoints {
    let sorted = field.sorted_sites();
    let mut sites = [[Site::ORIGIN; 2]; 2];
    let mut charges = [[0.0; 2]; 2];
    let mut degenerate = [[false; 2]; 2];
    for e in Sign::BOTH {
        for p in Parity::BOTH {
            let mut best: Option<(Site, f64)> = None;
            let mut tie = false;
            for x in sorted.iter().filter(|x| x.parity() == p) {
                let v = e.apply(field.charge_at(x));
                match best {
                    None => best = Some((*x, v)),
                    Some((_, b)) if v > b => {
                        best = Some((*x, v));
                        tie = false;
                    }
                    Some((_, b)) if v == b => tie = true,
                    _ => {}
                }
            }
            let (x, v) = match best {
                Some((x, v)) if v >= 0.0 => (x, v),
                _ => {
                    tie = true;
                    (unvisited_neighbour(field, &sorted, d, p), 0.0)
                }
            };
            sites[si(e)][pi(p)] = x;
            charges[si(e)][pi(p)] = e.apply(v);
            degenerate[si(e)][pi(p)] = tie || v == 0.0;
        }
    }
    ArgmaxPoints {
        sites,
        charges,
        degenerate,
    }
}

fn unvisited_neighbour(field: &OccupationField, sorted: &[Site], d: usize, p: Parity) -> Site {
    sorted
        .iter()
        .flat_map(|x| {
            x.neighbors(d)
                .flat_map(|y| std::iter::once(y).chain(y.neighbors(d).collect::<Vec<_>>()))
                .collect::<Vec<_>>()
        })
        .filter(|y| y.parity() == p && field.get(y).is_none())
        .min()
        .expect("a finite visited set has unvisited neighbours")
}

/// D_N = ΣΣ Q_ε^p (Q_ε^p − ε Q^{x_ε^p}).
pub fn distance_to_optimality(sums: &ParitySignSums, points: &ArgmaxPoints) -> f64 {
    let mut acc = 0.0;
    for e in Sign::BOTH {
        for p in Parity::BOTH {
            let big = sums.get(e, p);
            acc += big * (big - e.apply(points.charge(e, p)));
        }
    }
    acc
}

/// ΣΣ (Q_ε^p)²: the maximum of H_N over walks when d ≥ 2, an upper bound when d = 1.
pub fn max_energy_formula(q: &ChargeVector) -> f64 {
    parity_sign_sums(q).square_sum()
}

/// The σ-assignment walk attaining the maximal energy (d ≥ 2).
pub fn optimal_trajectory(q: &ChargeVector, d: usize) -> Result<Walk> {
    crate::lattice::check_dim(d)?;
    if d == 1 {
        return Err(PolyqError::Unsupported(
            "no four mutually adjacent sites in d = 1; use d1_strategy".into(),
        ));
    }
    if q.is_empty() {
        return Err(PolyqError::OutOfRange("empty charge vector".into()));
    }
    let a = Site([0, 0, 0, 0]);
    let b = Site([1, 1, 0, 0]);
    let (even_plus, even_minus) = if q[0] < 0.0 { (b, a) } else { (a, b) };
    let odd_plus = Site([0, 1, 0, 0]);
    let odd_minus = Site([1, 0, 0, 0]);
    let positions = q
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &x)| match (Parity::of_index(i), Sign::of(x)) {
            (Parity::Even, Sign::Plus) => even_plus,
            (Parity::Even, Sign::Minus) => even_minus,
            (Parity::Odd, Sign::Plus) => odd_plus,
            (Parity::Odd, Sign::Minus) => odd_minus,
        })
        .collect();
    Walk::from_positions(d, positions)
}

/// The one-dimensional placement: odd monomers at ±1 by charge sign, even
/// monomers at ±2 (beside equal neighbours) when their sign is `eps`, else 0.
pub fn d1_strategy(q: &ChargeVector, eps: Sign) -> Walk {
    let n = q.len();
    let odd_pos = |i: usize| if q[i] >= 0.0 { 1 } else { -1 };
    let mut pos = vec![0i32; n];
    for (i, slot) in pos.iter_mut().enumerate() {
        if i % 2 == 1 {
            *slot = odd_pos(i);
        } else if i > 0 {
            let left = odd_pos(i - 1);
            let same = i + 1 >= n || odd_pos(i + 1) == left;
            if same && Sign::of(q[i]) == eps {
                *slot = 2 * left;
            }
        }
    }
    Walk::from_positions(1, pos.into_iter().map(|x| Site([x, 0, 0, 0])).collect())
        .expect("strategy produces unit steps")
}

/// Output of the nonadjacent-pair lower bound on D_N.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapBound {
    pub bound: f64,
    pub pair: (Sign, Sign),
    /// min (Q_ε^p)².
    pub gamma: f64,
    /// min over (ε, ε') of the pair sums.
    pub lambda: f64,
}

/// Σ_{odd i} min(Q_ε^odd q_i^ε, Q_ε'^even q_{i-1}^ε').
pub fn pair_sum(q: &ChargeVector, sums: &ParitySignSums, e: Sign, e2: Sign) -> f64 {
    let a = sums.get(e, Parity::Odd);
    let b = sums.get(e2, Parity::Even);
    (1..q.len())
        .step_by(2)
        .map(|i| (a * e.part(q[i])).min(b * e2.part(q[i - 1])))
        .sum()
}

/// Empirical (Γ, Λ).
pub fn empirical_gamma_lambda(q: &ChargeVector) -> (f64, f64) {
    let sums = parity_sign_sums(q);
    let mut lam = f64::INFINITY;
    for e in Sign::BOTH {
        for e2 in Sign::BOTH {
            lam = lam.min(pair_sum(q, &sums, e, e2));
        }
    }
    (sums.gamma(), lam)
}

/// Largest pair bound over the nonadjacent (x_ε^odd, x_ε'^even) pairs.
pub fn lambda_gap_bound(q: &ChargeVector, points: &ArgmaxPoints) -> Result<GapBound> {
    let sums = parity_sign_sums(q);
    let mut best: Option<(f64, (Sign, Sign))> = None;
    for e in Sign::BOTH {
        for e2 in Sign::BOTH {
            if points.get(e, Parity::Odd).l1_dist(&points.get(e2, Parity::Even)) == 1 {
                continue;
            }
            let v = pair_sum(q, &sums, e, e2);
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, (e, e2)));
            }
        }
    }
    let (bound, pair) = best.ok_or_else(|| {
        PolyqError::Precondition("all four argmax pairs are adjacent".into())
    })?;
    let (gamma, lambda) = empirical_gamma_lambda(q);
    Ok(GapBound {
        bound,
        pair,
        gamma,
        lambda,
    })
}

/// {v, v+e_i, v+e_i+e_j, v+e_j} with i < j.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct UnitSquare {
    pub base: Site,
    pub i: usize,
    pub j: usize,
}

impl UnitSquare {
    pub fn corners(&self) -> [Site; 4] {
        let ei = Site::unit(self.i);
        let ej = Site::unit(self.j);
        let v = self.base;
        [v, v.add(&ei), v.add(&ei).add(&ej), v.add(&ej)]
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.corners().contains(x)
    }
}

/// Per-sample event record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Events {
    pub s_alpha: bool,
    pub c_alpha: bool,
    pub square: Option<UnitSquare>,
    /// First monomer in the square on S_α, N otherwise.
    pub r_alpha: usize,
    /// Argmax ties or fallbacks were involved.
    pub degenerate: bool,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(PolyqError::OutOfRange(format!("alpha={alpha} not in (0,1)")))
    }
}

/// The squares that satisfy the mass condition of S_α.
pub fn heavy_squares(q: &ChargeVector, w: &Walk, alpha: f64) -> Vec<UnitSquare> {
    let d = w.d();
    let mut mass: FxHashMap<Site, f64> = FxHashMap::default();
    let mut total = 0.0;
    for (x, &qi) in w.positions().iter().zip(q.as_slice()).skip(1) {
        *mass.entry(*x).or_insert(0.0) += qi.abs();
        total += qi.abs();
    }
    let mut seen: FxHashSet<UnitSquare> = FxHashSet::default();
    let mut out = Vec::new();
    let mut keys: Vec<Site> = w.positions().to_vec();
    keys.sort_unstable();
    keys.dedup();
    for s in &keys {
        for i in 0..d {
            for j in i + 1..d {
                for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let mut base = *s;
                    base.0[i] -= a;
                    base.0[j] -= b;
                    let sq = UnitSquare { base, i, j };
                    if !seen.insert(sq) {
                        continue;
                    }
                    let inside: f64 = sq.corners().iter().map(|c| mass.get(c).copied().unwrap_or(0.0)).sum();
                    if 2.0 * (total - inside) <= (1.0 - alpha) * total {
                        out.push(sq);
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// S_α, C_α and R_α for one walk.
pub fn detect_events(q: &ChargeVector, w: &Walk, alpha: f64) -> Result<Events> {
    check_alpha(alpha)?;
    if w.d() < 2 {
        return Err(PolyqError::Unsupported("unit squares need d >= 2".into()));
    }
    q.check_len(w.len())?;
    let total_abs: f64 = q.as_slice()[1..].iter().map(|x| x.abs()).sum();
    let heavy = if total_abs > 0.0 {
        heavy_squares(q, w, alpha)
    } else {
        Vec::new()
    };
    let square = if heavy.len() == 1 { Some(heavy[0]) } else { None };
    let s_alpha = square.is_some();
    let r_alpha = match &square {
        Some(sq) => w
            .positions()
            .iter()
            .position(|x| sq.contains(x))
            .unwrap_or(w.len()),
        None => w.len(),
    };
    let field = occupation(q, w)?;
    let points = argmax_points(&field, w.d());
    let sums = parity_sign_sums(q);
    let c_alpha = c_alpha_holds(&sums, &points, alpha);
    Ok(Events {
        s_alpha,
        c_alpha,
        square,
        r_alpha,
        degenerate: points.any_degenerate(),
    })
}

/// C_α: each x_ε^p carries ≥ (1+α)/2 of Q_ε^p, the cross pairs are adjacent,
/// and x_+^p ≠ x_-^p.
pub fn c_alpha_holds(sums: &ParitySignSums, points: &ArgmaxPoints, alpha: f64) -> bool {
    for e in Sign::BOTH {
        for p in Parity::BOTH {
            if 2.0 * e.apply(points.charge(e, p)) < (1.0 + alpha) * sums.get(e, p) {
                return false;
            }
        }
    }
    Parity::BOTH
        .iter()
        .all(|&p| points.get(Sign::Plus, p) != points.get(Sign::Minus, p))
        && points.cross_adjacent()
}

/// N² exp(L[ln(2d) − 2βα√Γ q̄_L/N]), bounding P(Diam ≥ L+1, C_α).
pub fn diam_bound(q: &ChargeVector, d: usize, beta: f64, alpha: f64, l: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let n = q.len() as f64;
    if l == 0 {
        return Ok(n * n);
    }
    let qb = qbar(q, l)?;
    let (gamma, _) = empirical_gamma_lambda(q);
    if qb.is_infinite() {
        return Ok(if beta * alpha * gamma > 0.0 { 0.0 } else { n * n * ((2 * d) as f64).powi(l as i32) });
    }
    let expo = l as f64 * (((2 * d) as f64).ln() - 2.0 * beta * alpha * gamma.sqrt() * qb / n);
    Ok(n * n * expo.exp())
}

/// Positions after sending monomers a..=b to their optimal sites, or `None`
/// when the result is not a nearest-neighbour path. Requires 1 ≤ a ≤ b < N.
pub fn fold_window(
    q: &[f64],
    positions: &[Site],
    points: &ArgmaxPoints,
    a: usize,
    b: usize,
) -> Option<Vec<Site>> {
    let n = positions.len();
    debug_assert!(a >= 1 && a <= b && b < n);
    let mut out = positions.to_vec();
    for i in a..=b {
        out[i] = points.get(Sign::of(q[i]), Parity::of_index(i));
    }
    let lo = a - 1;
    let hi = (b + 1).min(n - 1);
    for k in lo..hi {
        if out[k].l1_dist(&out[k + 1]) != 1 {
            return None;
        }
    }
    Some(out)
}

/// Result of applying the window map to a walk.
#[derive(Clone, Debug, PartialEq)]
pub enum Rewire {
    Applied {
        walk: Walk,
        gain: f64,
        /// 2α ΣΣ Q_ε^p Σ_{i∈I, i≡p} q_i^ε.
        claimed: f64,
    },
    Inapplicable(&'static str),
}

/// The window map on I = start..=end, applied only when C_α holds, S is
/// nonoptimal on I and optimal next to I. Requires |I| < N.
pub fn rewire(q: &ChargeVector, w: &Walk, start: usize, end: usize, alpha: f64) -> Result<Rewire> {
    check_alpha(alpha)?;
    q.check_len(w.len())?;
    let n = w.len();
    if start > end || end >= n || end - start + 1 >= n {
        return Err(PolyqError::BadWindow {
            window: end.saturating_sub(start) + 1,
            n: n - 1,
        });
    }
    let field = occupation(q, w)?;
    let points = argmax_points(&field, w.d());
    let sums = parity_sign_sums(q);
    if !c_alpha_holds(&sums, &points, alpha) {
        return Ok(Rewire::Inapplicable("C_alpha fails"));
    }
    let pos = w.positions();
    if (start..=end).any(|i| points.is_optimal(i, &pos[i], q[i])) {
        return Ok(Rewire::Inapplicable("window has an optimal monomer"));
    }
    for k in [start.checked_sub(1), Some(end + 1)].into_iter().flatten() {
        if k < n && !points.is_optimal(k, &pos[k], q[k]) {
            return Ok(Rewire::Inapplicable("neighbour of the window is not optimal"));
        }
    }
    let mut out = pos.to_vec();
    for i in start..=end {
        out[i] = points.get(Sign::of(q[i]), Parity::of_index(i));
    }
    let walk = Walk::reanchored(w.d(), &out)?;
    let h_old = field.energy();
    let h_new = occupation_of(q.as_slice(), walk.positions()).energy();
    let mut claimed = 0.0;
    for e in Sign::BOTH {
        for p in Parity::BOTH {
            let inner: f64 = (start..=end)
                .filter(|&i| Parity::of_index(i) == p)
                .map(|i| e.part(q[i]))
                .sum();
            claimed += sums.get(e, p) * inner;
        }
    }
    Ok(Rewire::Applied {
        walk,
        gain: h_new - h_old,
        claimed: 2.0 * alpha * claimed,
    })
}
