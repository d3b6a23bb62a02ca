//! Finite discrete distributions, independent products, first-order
//! stochastic dominance and explicit couplings.

use std::collections::BTreeMap;

use serde::de::Deserializer;
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Caps, Error, Result};
use crate::lp::{LinearProgram, PivotRule, Relation};
use crate::rational::Rat;
use crate::valuations::{ItemSet, Valuation};

/// A distribution over finitely many non-negative rationals.
///
/// Atoms are kept sorted by value with strictly positive probabilities that
/// sum to exactly one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscreteDist {
    atoms: Vec<(Rat, Rat)>,
}

impl DiscreteDist {
    /// Builds a distribution from `(value, probability)` pairs. Equal values are
    /// merged and zero-mass atoms dropped.
    pub fn new<I: IntoIterator<Item = (Rat, Rat)>>(atoms: I) -> Result<Self> {
        let mut merged: BTreeMap<Rat, Rat> = BTreeMap::new();
        for (v, p) in atoms {
            if v.is_negative() {
                return Err(Error::InvalidDistribution(format!("negative value {v}")));
            }
            if p.is_negative() {
                return Err(Error::InvalidDistribution(format!("negative probability {p}")));
            }
            *merged.entry(v).or_default() += p;
        }
        let atoms: Vec<(Rat, Rat)> = merged.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        let total: Rat = atoms.iter().map(|(_, p)| p).sum();
        if total != Rat::one() {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteDist { atoms })
    }

    pub fn point(v: Rat) -> Self {
        DiscreteDist::new([(v, Rat::one())]).expect("point mass at a non-negative value")
    }

    /// Equal mass on each listed value.
    pub fn uniform(values: &[Rat]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let p = Rat::new(1, values.len() as i64);
        DiscreteDist::new(values.iter().map(|v| (v.clone(), p.clone())))
    }

    pub fn atoms(&self) -> &[(Rat, Rat)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = &Rat> {
        self.atoms.iter().map(|(v, _)| v)
    }

    pub fn min_value(&self) -> &Rat {
        &self.atoms[0].0
    }

    pub fn max_value(&self) -> &Rat {
        &self.atoms[self.atoms.len() - 1].0
    }

    pub fn prob_of(&self, v: &Rat) -> Rat {
        self.atoms.binary_search_by(|(x, _)| x.cmp(v)).map(|k| self.atoms[k].1.clone()).unwrap_or_default()
    }

    /// `Pr{X > t}`.
    pub fn survival(&self, t: &Rat) -> Rat {
        self.atoms.iter().filter(|(v, _)| v > t).map(|(_, p)| p).sum()
    }

    /// `Pr{X >= t}`.
    pub fn survival_ge(&self, t: &Rat) -> Rat {
        self.atoms.iter().filter(|(v, _)| v >= t).map(|(_, p)| p).sum()
    }

    /// `Pr{X <= t}`.
    pub fn cdf(&self, t: &Rat) -> Rat {
        self.atoms.iter().filter(|(v, _)| v <= t).map(|(_, p)| p).sum()
    }

    pub fn mean(&self) -> Rat {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    /// Push-forward through `f` (values must stay non-negative).
    pub fn map<F: Fn(&Rat) -> Rat>(&self, f: F) -> Result<Self> {
        DiscreteDist::new(self.atoms.iter().map(|(v, p)| (f(v), p.clone())))
    }
}

impl Serialize for DiscreteDist {
    /// `[[value, "num", "den"], ...]` with the value itself a `["num","den"]` pair.
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.atoms.len()))?;
        for (v, p) in &self.atoms {
            seq.serialize_element(&(v, p.numer().to_string(), p.denom().to_string()))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for DiscreteDist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<(Rat, String, String)>::deserialize(d)?;
        let mut atoms = Vec::with_capacity(raw.len());
        for (v, n, den) in raw {
            let p = Rat::from_parts(&n, &den).map_err(serde::de::Error::custom)?;
            atoms.push((v, p));
        }
        DiscreteDist::new(atoms).map_err(serde::de::Error::custom)
    }
}

/// `G` first-order dominates `F`: `Pr{F > t} <= Pr{G > t}` for every `t`.
///
/// Survival functions are step functions that only change at support points,
/// so checking the union of supports is exhaustive.
pub fn dominates(f: &DiscreteDist, g: &DiscreteDist) -> bool {
    f.support().chain(g.support()).all(|t| f.survival(t) <= g.survival(t))
}

/// Strict dominance: dominance holds and the distributions differ.
pub fn strictly_dominates(f: &DiscreteDist, g: &DiscreteDist) -> bool {
    f != g && dominates(f, g)
}

/// A joint distribution of `(low, high)` pairs with exact probabilities.
///
/// `low` is distributed as the dominated distribution and `high` as the
/// dominating one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling<T> {
    pub pairs: Vec<(T, T, Rat)>,
}

impl<T: Clone + Ord> Coupling<T> {
    pub fn total(&self) -> Rat {
        self.pairs.iter().map(|(_, _, p)| p).sum()
    }

    pub fn low_marginal(&self) -> BTreeMap<T, Rat> {
        let mut out = BTreeMap::new();
        for (a, _, p) in &self.pairs {
            *out.entry(a.clone()).or_insert_with(Rat::zero) += p;
        }
        out
    }

    pub fn high_marginal(&self) -> BTreeMap<T, Rat> {
        let mut out = BTreeMap::new();
        for (_, b, p) in &self.pairs {
            *out.entry(b.clone()).or_insert_with(Rat::zero) += p;
        }
        out
    }
}

fn as_map(d: &DiscreteDist) -> BTreeMap<Rat, Rat> {
    d.atoms().iter().cloned().collect()
}

impl Coupling<Rat> {
    /// Marginals match `low`/`high` exactly and probabilities are positive.
    pub fn is_valid_for(&self, low: &DiscreteDist, high: &DiscreteDist) -> bool {
        self.pairs.iter().all(|(_, _, p)| p.is_positive())
            && self.total() == Rat::one()
            && self.low_marginal() == as_map(low)
            && self.high_marginal() == as_map(high)
    }
}

/// Inverse-CDF (comonotone) coupling of `f` and `g`.
///
/// Requires `g` to dominate `f`; then every pair satisfies `high >= low`.
pub fn quantile_couple(f: &DiscreteDist, g: &DiscreteDist) -> Result<Coupling<Rat>> {
    if !dominates(f, g) {
        return Err(Error::DominanceViolation);
    }
    let mut pairs = Vec::new();
    let (mut a, mut b) = (0usize, 0usize);
    let mut left_a = f.atoms()[0].1.clone();
    let mut left_b = g.atoms()[0].1.clone();
    while a < f.len() && b < g.len() {
        let mass = Rat::min_of(&left_a, &left_b).clone();
        pairs.push((f.atoms()[a].0.clone(), g.atoms()[b].0.clone(), mass.clone()));
        left_a -= &mass;
        left_b -= &mass;
        if left_a.is_zero() {
            a += 1;
            if a < f.len() {
                left_a = f.atoms()[a].1.clone();
            }
        }
        if left_b.is_zero() {
            b += 1;
            if b < g.len() {
                left_b = g.atoms()[b].1.clone();
            }
        }
    }
    Ok(Coupling { pairs })
}

/// A buyer's type vector (one coordinate per item).
pub type TypeVec = Vec<Rat>;

/// Every type vector of an independent row with its probability, in
/// lexicographic order (first coordinate most significant).
pub fn enumerate_row(row: &[DiscreteDist], caps: &Caps) -> Result<Vec<(TypeVec, Rat)>> {
    let size: u128 = row.iter().map(|d| d.len() as u128).product();
    caps.guard_joint("buyer type enumeration", size)?;
    let mut out: Vec<(TypeVec, Rat)> = vec![(Vec::with_capacity(row.len()), Rat::one())];
    for dist in row {
        let mut next = Vec::with_capacity(out.len() * dist.len());
        for (prefix, p) in &out {
            for (v, q) in dist.atoms() {
                let mut t = prefix.clone();
                t.push(v.clone());
                next.push((t, p * q));
            }
        }
        out = next;
    }
    Ok(out)
}

/// An `n x m` matrix of independent distributions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<DiscreteDist>>", into = "Vec<Vec<DiscreteDist>>")]
pub struct ProductDist {
    entries: Vec<Vec<DiscreteDist>>,
}

impl TryFrom<Vec<Vec<DiscreteDist>>> for ProductDist {
    type Error = Error;
    fn try_from(entries: Vec<Vec<DiscreteDist>>) -> Result<Self> {
        ProductDist::new(entries)
    }
}

impl From<ProductDist> for Vec<Vec<DiscreteDist>> {
    fn from(p: ProductDist) -> Self {
        p.entries
    }
}

/// A joint type profile `t[i][j]` with its probability.
pub type Profile = (Vec<TypeVec>, Rat);

impl ProductDist {
    pub fn new(entries: Vec<Vec<DiscreteDist>>) -> Result<Self> {
        let m = entries.first().map(Vec::len).unwrap_or(0);
        if entries.is_empty() || m == 0 {
            return Err(Error::Shape("product distribution needs n >= 1 and m >= 1".into()));
        }
        if entries.iter().any(|row| row.len() != m) {
            return Err(Error::Shape("ragged product distribution".into()));
        }
        Ok(ProductDist { entries })
    }

    /// One buyer per distribution, one coordinate each (single-parameter form).
    pub fn single_column(dists: Vec<DiscreteDist>) -> Result<Self> {
        ProductDist::new(dists.into_iter().map(|d| vec![d]).collect())
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn m(&self) -> usize {
        self.entries[0].len()
    }

    pub fn row(&self, i: usize) -> &[DiscreteDist] {
        &self.entries[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> &DiscreteDist {
        &self.entries[i][j]
    }

    pub fn entries(&self) -> &[Vec<DiscreteDist>] {
        &self.entries
    }

    pub fn joint_support_size(&self) -> u128 {
        self.entries.iter().flatten().map(|d| d.len() as u128).product()
    }

    pub fn buyer_types(&self, i: usize, caps: &Caps) -> Result<Vec<(TypeVec, Rat)>> {
        enumerate_row(&self.entries[i], caps)
    }

    /// Every joint profile with its probability. Buyer 0 varies slowest.
    pub fn profiles(&self, caps: &Caps) -> Result<Vec<Profile>> {
        caps.guard_joint("joint profile enumeration", self.joint_support_size())?;
        let per_buyer: Vec<Vec<(TypeVec, Rat)>> =
            (0..self.n()).map(|i| self.buyer_types(i, caps)).collect::<Result<_>>()?;
        let mut out: Vec<Profile> = vec![(Vec::with_capacity(self.n()), Rat::one())];
        for types in &per_buyer {
            let mut next = Vec::with_capacity(out.len() * types.len());
            for (prefix, p) in &out {
                for (t, q) in types {
                    let mut prof = prefix.clone();
                    prof.push(t.clone());
                    next.push((prof, p * q));
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Coordinatewise dominance `self ⪯ other`.
    pub fn dominated_by(&self, other: &ProductDist) -> bool {
        self.n() == other.n()
            && self.m() == other.m()
            && self.entries.iter().flatten().zip(other.entries.iter().flatten()).all(|(f, g)| dominates(f, g))
    }
}

/// `high ≥_v low`: `v_i(high, S) >= v_i(low, S)` for every bundle `S`.
pub fn v_ge<V: Valuation + ?Sized>(v: &V, buyer: usize, high: &[Rat], low: &[Rat]) -> bool {
    ItemSet::full(v.num_items()).subsets().all(|s| v.value(buyer, high, s) >= v.value(buyer, low, s))
}

struct Transport {
    low: Vec<(TypeVec, Rat)>,
    high: Vec<(TypeVec, Rat)>,
    /// `admissible[a]` lists every `b` with `high[b] ≥_v low[a]`.
    admissible: Vec<Vec<usize>>,
}

fn transport_problem<V: Valuation + ?Sized>(
    v: &V,
    buyer: usize,
    f_row: &[DiscreteDist],
    g_row: &[DiscreteDist],
    caps: &Caps,
) -> Result<Transport> {
    if f_row.len() != v.num_items() || g_row.len() != v.num_items() {
        return Err(Error::Shape("distribution rows must have one entry per item".into()));
    }
    let fs: u128 = f_row.iter().map(|d| d.len() as u128).product();
    let gs: u128 = g_row.iter().map(|d| d.len() as u128).product();
    caps.guard_joint("v-dominance pair enumeration", fs * gs)?;
    let low = enumerate_row(f_row, caps)?;
    let high = enumerate_row(g_row, caps)?;
    let admissible = low
        .iter()
        .map(|(tl, _)| high.iter().enumerate().filter(|(_, (th, _))| v_ge(v, buyer, th, tl)).map(|(b, _)| b).collect())
        .collect();
    Ok(Transport { low, high, admissible })
}

/// Decides `G_i ⪰_v F_i` for one buyer and returns a witness coupling.
///
/// The question is whether the transportation problem with supplies `F_i`,
/// demands `G_i` and only admissible edges `(t', t)` with `t ≥_v t'` is
/// feasible; it is solved as a maximum flow (Edmonds–Karp, exact rationals).
pub fn v_dominates<V: Valuation + ?Sized>(
    v: &V,
    buyer: usize,
    f_row: &[DiscreteDist],
    g_row: &[DiscreteDist],
    caps: &Caps,
) -> Result<Option<Coupling<TypeVec>>> {
    let tp = transport_problem(v, buyer, f_row, g_row, caps)?;
    let (na, nb) = (tp.low.len(), tp.high.len());
    // Nodes: 0 source, 1..=na low atoms, na+1..=na+nb high atoms, sink last.
    let sink = na + nb + 1;
    let mut graph = FlowGraph::new(sink + 1);
    for (a, (_, p)) in tp.low.iter().enumerate() {
        graph.add_edge(0, 1 + a, Some(p.clone()));
    }
    let mut middle = Vec::new();
    for (a, adj) in tp.admissible.iter().enumerate() {
        for &b in adj {
            middle.push((a, b, graph.add_edge(1 + a, 1 + na + b, None)));
        }
    }
    for (b, (_, p)) in tp.high.iter().enumerate() {
        graph.add_edge(1 + na + b, sink, Some(p.clone()));
    }
    let flow = graph.max_flow(0, sink);
    if flow != Rat::one() {
        return Ok(None);
    }
    let pairs = middle
        .into_iter()
        .filter_map(|(a, b, e)| {
            let f = graph.flow_on(e);
            f.is_positive().then(|| (tp.low[a].0.clone(), tp.high[b].0.clone(), f))
        })
        .collect();
    Ok(Some(Coupling { pairs }))
}

/// The same decision as [`v_dominates`], posed directly as a transportation
/// feasibility linear program and solved by the exact simplex.
pub fn v_dominates_lp<V: Valuation + ?Sized>(
    v: &V,
    buyer: usize,
    f_row: &[DiscreteDist],
    g_row: &[DiscreteDist],
    caps: &Caps,
) -> Result<Option<Coupling<TypeVec>>> {
    let tp = transport_problem(v, buyer, f_row, g_row, caps)?;
    let mut lp = LinearProgram::new();
    let mut vars = Vec::new();
    let mut by_low = vec![Vec::new(); tp.low.len()];
    let mut by_high = vec![Vec::new(); tp.high.len()];
    for (a, adj) in tp.admissible.iter().enumerate() {
        for &b in adj {
            let x = lp.add_var(Rat::zero());
            vars.push((a, b, x));
            by_low[a].push((x, Rat::one()));
            by_high[b].push((x, Rat::one()));
        }
    }
    for (a, (_, p)) in tp.low.iter().enumerate() {
        lp.add_constraint(std::mem::take(&mut by_low[a]), Relation::Eq, p.clone());
    }
    for (b, (_, p)) in tp.high.iter().enumerate() {
        lp.add_constraint(std::mem::take(&mut by_high[b]), Relation::Eq, p.clone());
    }
    match lp.solve(PivotRule::Bland) {
        Ok(sol) => Ok(Some(Coupling {
            pairs: vars
                .into_iter()
                .filter(|(_, _, x)| sol.values[*x].is_positive())
                .map(|(a, b, x)| (tp.low[a].0.clone(), tp.high[b].0.clone(), sol.values[x].clone()))
                .collect(),
        })),
        Err(crate::lp::LpError::Infeasible) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Checks a v-dominance witness: marginals, positivity and `high ≥_v low` on every pair.
pub fn is_v_witness<V: Valuation + ?Sized>(
    v: &V,
    buyer: usize,
    f_row: &[DiscreteDist],
    g_row: &[DiscreteDist],
    coupling: &Coupling<TypeVec>,
    caps: &Caps,
) -> Result<bool> {
    let low: BTreeMap<TypeVec, Rat> = enumerate_row(f_row, caps)?.into_iter().collect();
    let high: BTreeMap<TypeVec, Rat> = enumerate_row(g_row, caps)?.into_iter().collect();
    Ok(coupling.pairs.iter().all(|(a, b, p)| p.is_positive() && v_ge(v, buyer, b, a))
        && coupling.low_marginal() == low
        && coupling.high_marginal() == high)
}

/// Capacitated directed graph for exact max-flow; `None` capacity is unbounded.
struct FlowGraph {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<Option<Rat>>,
    flow: Vec<Rat>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph { adj: vec![Vec::new(); nodes], to: Vec::new(), cap: Vec::new(), flow: Vec::new() }
    }

    /// Returns the index of the forward edge; its reverse is `index ^ 1`.
    fn add_edge(&mut self, u: usize, w: usize, cap: Option<Rat>) -> usize {
        let e = self.to.len();
        self.adj[u].push(e);
        self.to.push(w);
        self.cap.push(cap);
        self.flow.push(Rat::zero());
        self.adj[w].push(e + 1);
        self.to.push(u);
        self.cap.push(Some(Rat::zero()));
        self.flow.push(Rat::zero());
        e
    }

    fn residual(&self, e: usize) -> Option<Rat> {
        self.cap[e].as_ref().map(|c| c - &self.flow[e])
    }

    fn flow_on(&self, e: usize) -> Rat {
        self.flow[e].clone()
    }

    fn max_flow(&mut self, s: usize, t: usize) -> Rat {
        let mut total = Rat::zero();
        loop {
            // BFS for a shortest augmenting path.
            let mut via: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    let w = self.to[e];
                    let open = match self.residual(e) {
                        None => true,
                        Some(r) => r.is_positive(),
                    };
                    if open && !seen[w] {
                        seen[w] = true;
                        via[w] = Some(e);
                        queue.push_back(w);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut bottleneck: Option<Rat> = None;
            let mut node = t;
            while node != s {
                let e = via[node].unwrap();
                if let Some(r) = self.residual(e) {
                    bottleneck = Some(match bottleneck {
                        None => r,
                        Some(b) => Rat::min_of(&b, &r).clone(),
                    });
                }
                node = self.to[e ^ 1];
            }
            // Source and sink edges are finite, so every s-t path has a bound.
            let push = bottleneck.expect("augmenting path with unbounded capacity");
            let mut node = t;
            while node != s {
                let e = via[node].unwrap();
                self.flow[e] += &push;
                self.flow[e ^ 1] -= &push;
                node = self.to[e ^ 1];
            }
            total += push;
        }
    }
}
