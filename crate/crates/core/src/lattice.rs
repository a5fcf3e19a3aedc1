//! Lattice sites, unit steps and origin-anchored nearest-neighbour walks.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{PolyqError, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of Z^d, stored in a fixed array; coordinates past `d` are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn from_coords(coords: &[i32]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(PolyqError::UnsupportedDimension(coords.len()));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site(c))
    }

    pub fn coords(&self, d: usize) -> &[i32] {
        &self.0[..d]
    }

    /// Unit vector along `axis`.
    pub fn unit(axis: usize) -> Self {
        let mut c = [0; MAX_DIM];
        c[axis] = 1;
        Site(c)
    }

    /// True when the coordinate sum is even.
    pub fn is_even(&self) -> bool {
        self.0.iter().map(|&c| c as i64).sum::<i64>().rem_euclid(2) == 0
    }

    pub fn parity(&self) -> Parity {
        if self.is_even() {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn l1_dist(&self, other: &Site) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    pub fn add(&self, other: &Site) -> Site {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(other.0.iter()) {
            *x += *y;
        }
        Site(c)
    }

    pub fn sub(&self, other: &Site) -> Site {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(other.0.iter()) {
            *x -= *y;
        }
        Site(c)
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        v.iter().zip(self.0.iter()).map(|(a, &b)| a * b as f64).sum()
    }

    /// The `2d` nearest neighbours, in step order.
    pub fn neighbors(&self, d: usize) -> impl Iterator<Item = Site> + '_ {
        (0..2 * d).map(move |k| self.add(&Step(k as u8).vector()))
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Parity of a time index or of a site (sum of coordinates).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_index(i: usize) -> Parity {
        if i % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];
}

/// One of the `2d` unit increments, encoded as `2 * axis + (negative as u8)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct Step(pub u8);

impl Step {
    pub fn new(axis: usize, positive: bool) -> Step {
        Step((2 * axis + usize::from(!positive)) as u8)
    }

    pub fn axis(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn vector(self) -> Site {
        let mut c = [0; MAX_DIM];
        c[self.axis()] = if self.is_positive() { 1 } else { -1 };
        Site(c)
    }

    /// Recovers the step joining two adjacent sites.
    pub fn between(from: &Site, to: &Site, d: usize) -> Option<Step> {
        let diff = to.sub(from);
        let mut found = None;
        for axis in 0..MAX_DIM {
            match diff.0[axis] {
                0 => {}
                1 | -1 if axis < d && found.is_none() => {
                    found = Some(Step::new(axis, diff.0[axis] == 1));
                }
                _ => return None,
            }
        }
        found
    }

    pub fn all(d: usize) -> impl Iterator<Item = Step> {
        (0..2 * d as u8).map(Step)
    }
}

/// A nearest-neighbour trajectory S_0 = 0, S_1, ..., S_{N-1} on Z^d.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Walk {
    d: usize,
    steps: Vec<Step>,
    positions: Vec<Site>,
}

pub fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        Err(PolyqError::UnsupportedDimension(d))
    } else {
        Ok(())
    }
}

impl Walk {
    pub fn from_steps(d: usize, steps: Vec<Step>) -> Result<Walk> {
        check_dim(d)?;
        let mut positions = Vec::with_capacity(steps.len() + 1);
        let mut x = Site::ORIGIN;
        positions.push(x);
        for s in &steps {
            if s.axis() >= d {
                return Err(PolyqError::InvalidWalk(format!(
                    "step {:?} leaves dimension {d}",
                    s
                )));
            }
            x = x.add(&s.vector());
            positions.push(x);
        }
        Ok(Walk {
            d,
            steps,
            positions,
        })
    }

    /// Builds a walk from explicit positions; they must start at the origin and
    /// move by one unit step at a time.
    pub fn from_positions(d: usize, positions: Vec<Site>) -> Result<Walk> {
        check_dim(d)?;
        let first = positions
            .first()
            .ok_or_else(|| PolyqError::InvalidWalk("empty walk".into()))?;
        if *first != Site::ORIGIN {
            return Err(PolyqError::InvalidWalk("S_0 is not the origin".into()));
        }
        let mut steps = Vec::with_capacity(positions.len() - 1);
        for (i, w) in positions.windows(2).enumerate() {
            let s = Step::between(&w[0], &w[1], d).ok_or_else(|| {
                PolyqError::InvalidWalk(format!("positions {i} and {} are not adjacent", i + 1))
            })?;
            steps.push(s);
        }
        Ok(Walk {
            d,
            steps,
            positions,
        })
    }

    /// Positions shifted so the first one is the origin.
    pub fn reanchored(d: usize, positions: &[Site]) -> Result<Walk> {
        let base = *positions
            .first()
            .ok_or_else(|| PolyqError::InvalidWalk("empty walk".into()))?;
        Walk::from_positions(d, positions.iter().map(|x| x.sub(&base)).collect())
    }

    /// Straight walk along the first axis.
    pub fn straight(d: usize, n: usize) -> Result<Walk> {
        Walk::from_steps(d, vec![Step(0); n.saturating_sub(1)])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of monomers N.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn positions(&self) -> &[Site] {
        &self.positions
    }

    pub fn endpoint(&self) -> Site {
        *self.positions.last().expect("walk has at least one monomer")
    }

    /// L¹ diameter of the visited set.
    pub fn diameter(&self) -> u32 {
        diameter_of(self.d, &self.positions)
    }
}

/// L¹ diameter of a finite point set: the maximum over the 2^{d-1} sign
/// patterns of the spread of the projected coordinates.
pub fn diameter_of(d: usize, sites: &[Site]) -> u32 {
    if sites.is_empty() {
        return 0;
    }
    let mut best = 0i64;
    for mask in 0..(1u32 << (d - 1)) {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for x in sites {
            let mut v = x.0[0] as i64;
            for k in 1..d {
                let c = x.0[k] as i64;
                v += if mask & (1 << (k - 1)) != 0 { -c } else { c };
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        best = best.max(hi - lo);
    }
    best as u32
}

impl Serialize for Walk {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[i32]> = self.positions.iter().map(|x| x.coords(self.d)).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Walk {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<i32>> = Vec::deserialize(deserializer)?;
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut positions = Vec::with_capacity(rows.len());
        for r in &rows {
            if r.len() != d {
                return Err(D::Error::custom("ragged position rows"));
            }
            positions.push(Site::from_coords(r).map_err(D::Error::custom)?);
        }
        Walk::from_positions(d, positions).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_roundtrip_through_positions() {
        let w = Walk::from_steps(2, vec![Step(0), Step(2), Step(1), Step(3)]).unwrap();
        let back = Walk::from_positions(2, w.positions().to_vec()).unwrap();
        assert_eq!(w, back);
        assert_eq!(w.endpoint(), Site::ORIGIN);
    }

    #[test]
    fn rejects_non_adjacent_positions() {
        let p = vec![Site::ORIGIN, Site([1, 1, 0, 0])];
        assert!(Walk::from_positions(2, p).is_err());
        let p = vec![Site([1, 0, 0, 0])];
        assert!(Walk::from_positions(2, p).is_err());
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(Walk::straight(2, 1).unwrap().diameter(), 0);
        assert_eq!(Walk::straight(3, 7).unwrap().diameter(), 6);
        let back_forth = Walk::from_steps(2, vec![Step(0), Step(1), Step(0), Step(1)]).unwrap();
        assert_eq!(back_forth.diameter(), 1);
        let corner = Walk::from_steps(2, vec![Step(0), Step(2)]).unwrap();
        assert_eq!(corner.diameter(), 2);
    }

    #[test]
    fn diameter_matches_pairwise_scan() {
        let w = Walk::from_steps(
            3,
            vec![Step(0), Step(2), Step(4), Step(1), Step(3), Step(3), Step(5), Step(5)],
        )
        .unwrap();
        let p = w.positions();
        let brute = p
            .iter()
            .flat_map(|a| p.iter().map(move |b| a.l1_dist(b)))
            .max()
            .unwrap();
        assert_eq!(w.diameter(), brute);
    }

    #[test]
    fn json_is_an_array_of_positions() {
        let w = Walk::from_steps(2, vec![Step(0), Step(2)]).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, "[[0,0],[1,0],[1,1]]");
        let back: Walk = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
    }
}
