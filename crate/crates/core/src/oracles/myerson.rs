use serde::{Deserialize, Serialize};

use crate::error::{Caps, Error, Result};
use crate::prob::DiscreteDist;
use crate::rational::Rat;

/// Discrete virtual values of one distribution, before and after ironing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IronedVirtuals {
    pub values: Vec<Rat>,
    pub probs: Vec<Rat>,
    pub raw: Vec<Rat>,
    pub ironed: Vec<Rat>,
}

impl IronedVirtuals {
    /// Ironed virtual value at a support point.
    pub fn at(&self, v: &Rat) -> Option<&Rat> {
        self.values.binary_search(v).ok().map(|k| &self.ironed[k])
    }

    /// `E[max(phi_bar, 0)]`: the single-bidder optimal revenue.
    pub fn positive_surplus(&self) -> Rat {
        self.ironed.iter().zip(&self.probs).map(|(phi, p)| phi.positive_part() * p).sum()
    }
}

/// Slopes of the revenue curve `q -> v(q) * q` and of its concave hull.
///
/// With `q_k = Pr{V >= v_k}`, the raw virtual value of atom `k` is the slope
/// between the curve points at `q_{k+1}` and `q_k`; ironing replaces each
/// slope with that of the least concave majorant over the same interval.
pub fn ironed_virtuals(dist: &DiscreteDist) -> IronedVirtuals {
    let values: Vec<Rat> = dist.support().cloned().collect();
    let probs: Vec<Rat> = dist.atoms().iter().map(|(_, p)| p.clone()).collect();
    let k = values.len();

    // pts[0] = (0, 0); pts[s] for s >= 1 is atom k - s, so q increases with s.
    let mut pts: Vec<(Rat, Rat)> = vec![(Rat::zero(), Rat::zero())];
    let mut q = Rat::zero();
    for idx in (0..k).rev() {
        q += &probs[idx];
        let rev = &values[idx] * &q;
        pts.push((q.clone(), rev));
    }
    let slope = |a: usize, b: usize| (&pts[b].1 - &pts[a].1) / (&pts[b].0 - &pts[a].0);

    let raw: Vec<Rat> = (0..k).map(|idx| slope(k - idx - 1, k - idx)).collect();

    // Upper hull by monotone chain; pop while the middle point is on or below the chord.
    let mut hull: Vec<usize> = Vec::with_capacity(pts.len());
    for s in 0..pts.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross =
                (&pts[b].0 - &pts[a].0) * (&pts[s].1 - &pts[a].1) - (&pts[b].1 - &pts[a].1) * (&pts[s].0 - &pts[a].0);
            if cross.is_negative() {
                break;
            }
            hull.pop();
        }
        hull.push(s);
    }
    let mut ironed = vec![Rat::zero(); k];
    for w in hull.windows(2) {
        let sl = slope(w[0], w[1]);
        for s in w[0] + 1..=w[1] {
            ironed[k - s] = sl.clone();
        }
    }
    IronedVirtuals { values, probs, raw, ironed }
}

/// A single-parameter outcome set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Environment {
    /// Finitely many allocation vectors in `[0,1]^n`, including the zero vector.
    Explicit { vertices: Vec<Vec<Rat>> },
    /// `n * m` bidders `(i, j)`; each buyer and each item is matched at most once.
    Matching { n: usize, m: usize },
}

impl Environment {
    pub fn explicit(vertices: Vec<Vec<Rat>>) -> Result<Self> {
        let env = Environment::Explicit { vertices };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Environment::Explicit { vertices } => {
                let n = vertices.first().map(Vec::len).ok_or_else(|| Error::Config("empty outcome set".into()))?;
                if vertices.iter().any(|a| a.len() != n) {
                    return Err(Error::Shape("outcome vectors differ in length".into()));
                }
                if vertices.iter().flatten().any(|x| x.is_negative() || *x > Rat::one()) {
                    return Err(Error::Config("outcome coordinates must lie in [0, 1]".into()));
                }
                if !vertices.iter().any(|a| a.iter().all(Rat::is_zero)) {
                    return Err(Error::Config("outcome set must contain the zero vector".into()));
                }
                Ok(())
            }
            Environment::Matching { n, m } => {
                if *n == 0 || *m == 0 {
                    return Err(Error::Shape("matching environment needs n, m >= 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn num_bidders(&self) -> usize {
        match self {
            Environment::Explicit { vertices } => vertices[0].len(),
            Environment::Matching { n, m } => n * m,
        }
    }

    /// Every 0/1 matching of the `n x m` grid, bidder `(i, j)` at index `i*m + j`.
    pub fn matching_vertices(n: usize, m: usize) -> Vec<Vec<Rat>> {
        let mut out = Vec::new();
        let mut cur = vec![None::<usize>; n];
        fn rec(i: usize, used: u32, n: usize, m: usize, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Rat>>) {
            if i == n {
                let mut a = vec![Rat::zero(); n * m];
                for (b, c) in cur.iter().enumerate() {
                    if let Some(j) = c {
                        a[b * m + j] = Rat::one();
                    }
                }
                out.push(a);
                return;
            }
            cur[i] = None;
            rec(i + 1, used, n, m, cur, out);
            for j in 0..m {
                if used & (1 << j) == 0 {
                    cur[i] = Some(j);
                    rec(i + 1, used | (1 << j), n, m, cur, out);
                }
            }
            cur[i] = None;
        }
        rec(0, 0, n, m, &mut cur, &mut out);
        out
    }

    /// `max_{a in A} sum_k w_k a_k`.
    pub fn max_weight(&self, w: &[Rat]) -> Rat {
        match self {
            Environment::Explicit { vertices } => {
                vertices.iter().map(|a| a.iter().zip(w).map(|(x, y)| x * y).sum::<Rat>()).max().unwrap_or_default()
            }
            Environment::Matching { n, m } => max_weight_matching(*n, *m, w),
        }
    }
}

/// Maximum-weight matching on the `n x m` bipartite grid by DP over used-item masks.
/// Negative weights are never worth taking.
pub fn max_weight_matching(n: usize, m: usize, w: &[Rat]) -> Rat {
    let states = 1usize << m;
    let mut best: Vec<Option<Rat>> = vec![None; states];
    best[0] = Some(Rat::zero());
    for i in 0..n {
        let mut next = best.clone();
        for (mask, cur) in best.iter().enumerate() {
            let Some(cur) = cur else { continue };
            for j in 0..m {
                let wij = &w[i * m + j];
                if mask & (1 << j) != 0 || !wij.is_positive() {
                    continue;
                }
                let cand = cur + wij;
                let slot = &mut next[mask | (1 << j)];
                if slot.as_ref().is_none_or(|s| cand > *s) {
                    *slot = Some(cand);
                }
            }
        }
        best = next;
    }
    best.into_iter().flatten().max().unwrap_or_default()
}

/// `REV_A(F) = E_t[max_{a in A} sum_k phi_bar_k(t_k) a_k]` for independent bidders.
pub fn opt_single_param(env: &Environment, dists: &[DiscreteDist], caps: &Caps) -> Result<Rat> {
    env.validate()?;
    if dists.len() != env.num_bidders() {
        return Err(Error::Shape(format!(
            "environment has {} bidders but {} distributions were given",
            env.num_bidders(),
            dists.len()
        )));
    }
    if let Environment::Matching { m, .. } = env {
        caps.guard_subset("matching item masks", *m as u32)?;
    }
    let size: u128 = dists.iter().map(|d| d.len() as u128).product();
    caps.guard_joint("single-parameter profile enumeration", size)?;

    let phis: Vec<IronedVirtuals> = dists.iter().map(ironed_virtuals).collect();
    let mut total = Rat::zero();
    let mut idx = vec![0usize; dists.len()];
    let mut w: Vec<Rat> = phis.iter().map(|p| p.ironed[0].clone()).collect();
    loop {
        let prob: Rat = idx.iter().zip(&phis).map(|(&k, p)| &p.probs[k]).product();
        total += env.max_weight(&w) * prob;
        // Odometer over support indices, last bidder fastest.
        let mut b = dists.len();
        loop {
            if b == 0 {
                return Ok(total);
            }
            b -= 1;
            idx[b] += 1;
            if idx[b] < phis[b].values.len() {
                w[b] = phis[b].ironed[idx[b]].clone();
                break;
            }
            idx[b] = 0;
            w[b] = phis[b].ironed[0].clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::r;

    fn d(atoms: &[(i64, i64, i64)]) -> DiscreteDist {
        DiscreteDist::new(atoms.iter().map(|&(v, n, den)| (Rat::from_integer(v), r(n, den)))).unwrap()
    }

    #[test]
    fn point_mass_virtual_is_value() {
        let iv = ironed_virtuals(&DiscreteDist::point(r(7, 2)));
        assert_eq!(iv.raw, vec![r(7, 2)]);
        assert_eq!(iv.ironed, vec![r(7, 2)]);
    }

    #[test]
    fn two_point_regular() {
        let iv = ironed_virtuals(&d(&[(1, 1, 2), (2, 1, 2)]));
        assert_eq!(iv.raw, vec![r(0, 1), r(2, 1)]);
        assert_eq!(iv.ironed, iv.raw);
        assert_eq!(iv.positive_surplus(), r(1, 1));
    }

    #[test]
    fn irregular_gets_ironed() {
        // Revenue curve points: q=1/5 -> 2, q=1/2 -> 3/2, q=1 -> 1; the middle dips below the chord.
        let f = d(&[(1, 1, 2), (3, 3, 10), (10, 1, 5)]);
        let iv = ironed_virtuals(&f);
        assert!(iv.raw[0] > iv.raw[1]);
        assert_eq!(iv.ironed[0], iv.ironed[1]);
        assert!(iv.ironed.windows(2).all(|w| w[0] <= w[1]));
        // Best posted price is 10 with revenue 2.
        assert_eq!(iv.positive_surplus(), r(2, 1));
    }

    #[test]
    fn one_item_environment() {
        let caps = Caps::default();
        let env = Environment::explicit(vec![vec![r(0, 1)], vec![r(1, 1)]]).unwrap();
        assert_eq!(opt_single_param(&env, &[d(&[(1, 1, 2), (2, 1, 2)])], &caps).unwrap(), r(1, 1));
        let none = Environment::explicit(vec![vec![r(0, 1)]]).unwrap();
        assert_eq!(opt_single_param(&none, &[d(&[(1, 1, 2), (2, 1, 2)])], &caps).unwrap(), r(0, 1));
    }

    #[test]
    fn explicit_sets_must_contain_zero() {
        assert!(Environment::explicit(vec![vec![r(1, 1)]]).is_err());
        assert!(Environment::explicit(vec![vec![r(0, 1)], vec![r(3, 2)]]).is_err());
    }

    #[test]
    fn matching_dp_agrees_with_vertex_list() {
        let w: Vec<Rat> = [3, -1, 4, 1, 5, -9].iter().map(|&x| Rat::from_integer(x)).collect();
        for (n, m) in [(2, 3), (3, 2), (1, 6), (6, 1)] {
            let verts = Environment::Explicit { vertices: Environment::matching_vertices(n, m) };
            assert_eq!(verts.max_weight(&w), max_weight_matching(n, m, &w), "n={n} m={m}");
        }
        assert_eq!(max_weight_matching(2, 3, &w), r(9, 1));
    }
}
