//! Valuations: XOS clause matrices, explicit tables, supporting prices and
//! brute-force structural checks.
//!
//! An XOS valuation for buyer `i` is a list of clauses; clause `k` holds one
//! multiplier per item and contributes `sum_{j in S} alpha[k][j] * t[j]`. The
//! buyer's value for `S` is the largest clause contribution. Additive and
//! unit-demand valuations are the one-clause and unit-vector special cases.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Caps, Error, Result};
use crate::lp::{LinearProgram, PivotRule, Relation};
use crate::rational::Rat;

/// A subset of items `{0, .., m-1}` stored as a bitmask (item `j` has weight `2^j`).
///
/// The derived order is the numeric order of the mask; "lexicographically
/// smallest bundle" always refers to this order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ItemSet(u32);

pub const MAX_ITEMS: usize = 31;

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub fn from_bits(bits: u32) -> ItemSet {
        ItemSet(bits)
    }

    pub fn full(m: usize) -> ItemSet {
        assert!(m <= MAX_ITEMS);
        ItemSet(((1u64 << m) - 1) as u32)
    }

    pub fn singleton(j: usize) -> ItemSet {
        ItemSet(1 << j)
    }

    pub fn from_items<I: IntoIterator<Item = usize>>(items: I) -> ItemSet {
        ItemSet(items.into_iter().fold(0, |acc, j| acc | (1 << j)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        self.0 & (1 << j) != 0
    }

    pub fn insert(self, j: usize) -> ItemSet {
        ItemSet(self.0 | (1 << j))
    }

    pub fn remove(self, j: usize) -> ItemSet {
        ItemSet(self.0 & !(1 << j))
    }

    pub fn union(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & other.0)
    }

    pub fn difference(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: ItemSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |j| bits & (1 << j) != 0)
    }

    /// All subsets of `self` in increasing mask order, starting with the empty set.
    pub fn subsets(self) -> impl Iterator<Item = ItemSet> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(ItemSet(cur))
        })
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for ItemSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ItemSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(d)?;
        if let Some(j) = items.iter().find(|&&j| j >= MAX_ITEMS) {
            return Err(serde::de::Error::custom(format!("item index {j} out of range")));
        }
        Ok(ItemSet::from_items(items))
    }
}

/// `v_i(t_i, S)` for every buyer.
pub trait Valuation: Sync {
    fn num_buyers(&self) -> usize;
    fn num_items(&self) -> usize;
    fn value(&self, buyer: usize, ty: &[Rat], set: ItemSet) -> Rat;

    /// `V_ij = v_i(t_i, {j})`.
    fn single(&self, buyer: usize, ty: &[Rat], item: usize) -> Rat {
        self.value(buyer, ty, ItemSet::singleton(item))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XosValuation {
    m: usize,
    /// `clauses[i][k][j]`.
    clauses: Vec<Vec<Vec<Rat>>>,
}

impl XosValuation {
    pub fn new(m: usize, clauses: Vec<Vec<Vec<Rat>>>) -> Result<Self> {
        if m > MAX_ITEMS {
            return Err(Error::Shape(format!("at most {MAX_ITEMS} items supported, got {m}")));
        }
        for (i, buyer) in clauses.iter().enumerate() {
            if buyer.is_empty() {
                return Err(Error::Shape(format!("buyer {i} has no clauses")));
            }
            for clause in buyer {
                if clause.len() != m {
                    return Err(Error::Shape(format!(
                        "buyer {i} clause has {} multipliers, expected {m}",
                        clause.len()
                    )));
                }
                if clause.iter().any(Rat::is_negative) {
                    return Err(Error::Shape(format!("buyer {i} has a negative multiplier")));
                }
            }
        }
        Ok(XosValuation { m, clauses })
    }

    pub fn additive(n: usize, m: usize) -> Self {
        XosValuation { m, clauses: vec![vec![vec![Rat::one(); m]]; n] }
    }

    pub fn unit_demand(n: usize, m: usize) -> Self {
        let unit = (0..m)
            .map(|k| (0..m).map(|j| if j == k { Rat::one() } else { Rat::zero() }).collect())
            .collect::<Vec<Vec<Rat>>>();
        XosValuation { m, clauses: vec![unit; n] }
    }

    pub fn clauses(&self, buyer: usize) -> &[Vec<Rat>] {
        &self.clauses[buyer]
    }

    pub fn all_clauses(&self) -> &[Vec<Vec<Rat>>] {
        &self.clauses
    }

    /// Every buyer's clauses are exactly the unit vectors (in any order).
    pub fn is_unit_demand(&self) -> bool {
        self.clauses.iter().all(|cl| {
            cl.len() == self.m
                && (0..self.m).all(|j| {
                    cl.iter()
                        .any(|c| c.iter().enumerate().all(|(l, a)| if l == j { *a == Rat::one() } else { a.is_zero() }))
                })
        })
    }

    pub fn is_additive(&self) -> bool {
        self.clauses.iter().all(|cl| cl.len() == 1 && cl[0].iter().all(|a| *a == Rat::one()))
    }

    fn clause_value(clause: &[Rat], ty: &[Rat], set: ItemSet) -> Rat {
        set.iter().map(|j| &clause[j] * &ty[j]).sum()
    }

    /// Maximizing clause (smallest index on ties) and its value.
    pub fn best_clause(&self, buyer: usize, ty: &[Rat], set: ItemSet) -> (usize, Rat) {
        let mut best = (0, Self::clause_value(&self.clauses[buyer][0], ty, set));
        for (k, clause) in self.clauses[buyer].iter().enumerate().skip(1) {
            let v = Self::clause_value(clause, ty, set);
            if v > best.1 {
                best = (k, v);
            }
        }
        best
    }
}

impl Valuation for XosValuation {
    fn num_buyers(&self) -> usize {
        self.clauses.len()
    }

    fn num_items(&self) -> usize {
        self.m
    }

    fn value(&self, buyer: usize, ty: &[Rat], set: ItemSet) -> Rat {
        if set.is_empty() {
            return Rat::zero();
        }
        self.best_clause(buyer, ty, set).1
    }
}

/// One row of an explicit valuation table: `values[S.bits()] = v_i(ty, S)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub buyer: usize,
    #[serde(rename = "type")]
    pub ty: Vec<Rat>,
    pub values: Vec<Rat>,
}

/// Explicit `v_i(t_i, S)` tables, used for structural counterexamples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableValuation {
    n: usize,
    m: usize,
    index: HashMap<(usize, Vec<Rat>), usize>,
    entries: Vec<TableEntry>,
}

impl TableValuation {
    pub fn new(n: usize, m: usize, entries: Vec<TableEntry>) -> Result<Self> {
        if m > 16 {
            return Err(Error::Shape(format!("table valuations support at most 16 items, got {m}")));
        }
        let mut index = HashMap::new();
        for (k, e) in entries.iter().enumerate() {
            if e.buyer >= n || e.ty.len() != m || e.values.len() != 1 << m {
                return Err(Error::Shape(format!("table entry {k} has the wrong shape")));
            }
            if !e.values[0].is_zero() {
                return Err(Error::Shape(format!("table entry {k} gives the empty set non-zero value")));
            }
            if e.values.iter().any(Rat::is_negative) {
                return Err(Error::Shape(format!("table entry {k} has a negative value")));
            }
            if index.insert((e.buyer, e.ty.clone()), k).is_some() {
                return Err(Error::Shape(format!("table entry {k} duplicates an earlier type")));
            }
        }
        Ok(TableValuation { n, m, index, entries })
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn get(&self, buyer: usize, ty: &[Rat], set: ItemSet) -> Option<&Rat> {
        let k = self.index.get(&(buyer, ty.to_vec()))?;
        self.entries[*k].values.get(set.bits() as usize)
    }

    /// Types listed for `buyer`.
    pub fn type_space(&self, buyer: usize) -> Vec<Vec<Rat>> {
        self.entries.iter().filter(|e| e.buyer == buyer).map(|e| e.ty.clone()).collect()
    }
}

impl Valuation for TableValuation {
    fn num_buyers(&self) -> usize {
        self.n
    }

    fn num_items(&self) -> usize {
        self.m
    }

    /// Panics when `ty` is not listed for `buyer`; tables are total over their own type space.
    fn value(&self, buyer: usize, ty: &[Rat], set: ItemSet) -> Rat {
        self.get(buyer, ty, set)
            .unwrap_or_else(|| panic!("type {ty:?} of buyer {buyer} is not in the valuation table"))
            .clone()
    }
}

/// Wire form of a valuation: `{"kind":"xos","clauses":[..]}` or `{"kind":"table",..}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ValuationSpec {
    Xos { m: usize, clauses: Vec<Vec<Vec<Rat>>> },
    Table { n: usize, m: usize, entries: Vec<TableEntry> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnyValuation {
    Xos(XosValuation),
    Table(TableValuation),
}

impl AnyValuation {
    pub fn from_spec(spec: ValuationSpec) -> Result<Self> {
        match spec {
            ValuationSpec::Xos { m, clauses } => Ok(AnyValuation::Xos(XosValuation::new(m, clauses)?)),
            ValuationSpec::Table { n, m, entries } => Ok(AnyValuation::Table(TableValuation::new(n, m, entries)?)),
        }
    }

    pub fn to_spec(&self) -> ValuationSpec {
        match self {
            AnyValuation::Xos(v) => ValuationSpec::Xos { m: v.m, clauses: v.clauses.clone() },
            AnyValuation::Table(t) => ValuationSpec::Table { n: t.n, m: t.m, entries: t.entries.clone() },
        }
    }

    pub fn as_xos(&self) -> Option<&XosValuation> {
        match self {
            AnyValuation::Xos(v) => Some(v),
            AnyValuation::Table(_) => None,
        }
    }
}

impl Serialize for AnyValuation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for AnyValuation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        AnyValuation::from_spec(ValuationSpec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Valuation for AnyValuation {
    fn num_buyers(&self) -> usize {
        match self {
            AnyValuation::Xos(v) => v.num_buyers(),
            AnyValuation::Table(v) => v.num_buyers(),
        }
    }

    fn num_items(&self) -> usize {
        match self {
            AnyValuation::Xos(v) => v.num_items(),
            AnyValuation::Table(v) => v.num_items(),
        }
    }

    fn value(&self, buyer: usize, ty: &[Rat], set: ItemSet) -> Rat {
        match self {
            AnyValuation::Xos(v) => v.value(buyer, ty, set),
            AnyValuation::Table(v) => v.value(buyer, ty, set),
        }
    }
}

/// Prices `(p_j | j in S)`, aligned with `set.iter()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceVector {
    pub set: ItemSet,
    pub prices: Vec<Rat>,
}

impl PriceVector {
    pub fn price_of(&self, item: usize) -> Option<&Rat> {
        self.set.iter().position(|j| j == item).map(|k| &self.prices[k])
    }

    /// Sum of prices over `sub` (items outside the vector count as zero).
    pub fn sum_over(&self, sub: ItemSet) -> Rat {
        self.set.iter().zip(&self.prices).filter(|(j, _)| sub.contains(*j)).map(|(_, p)| p).sum()
    }

    pub fn total(&self) -> Rat {
        self.prices.iter().sum()
    }
}

pub fn value<V: Valuation + ?Sized>(v: &V, buyer: usize, ty: &[Rat], set: ItemSet) -> Rat {
    v.value(buyer, ty, set)
}

/// 1-supporting prices of an XOS valuation: the maximizing clause's per-item terms.
pub fn supporting_prices(v: &XosValuation, buyer: usize, ty: &[Rat], set: ItemSet) -> PriceVector {
    let (k, _) = v.best_clause(buyer, ty, set);
    let clause = &v.clauses(buyer)[k];
    PriceVector { set, prices: set.iter().map(|j| &clause[j] * &ty[j]).collect() }
}

/// Checks both supporting-price conditions for `alpha` by enumerating every `S' ⊆ S`.
pub fn is_supporting<V: Valuation + ?Sized>(
    v: &V,
    buyer: usize,
    ty: &[Rat],
    prices: &PriceVector,
    alpha: &Rat,
) -> bool {
    if prices.prices.iter().any(Rat::is_negative) {
        return false;
    }
    let lower = prices.set.subsets().all(|sub| v.value(buyer, ty, sub) >= prices.sum_over(sub));
    lower && &prices.total() * alpha >= v.value(buyer, ty, prices.set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Monotone,
    Subadditive,
    NoExternalities,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub property: Property,
    pub buyer: usize,
    #[serde(rename = "type")]
    pub ty: Vec<Rat>,
    /// For no-externalities: the second type that agrees on `sets[0]`.
    pub other_type: Option<Vec<Rat>>,
    pub sets: Vec<ItemSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub monotone: bool,
    pub subadditive: bool,
    pub no_externalities: bool,
    pub first_violation: Option<Violation>,
}

/// Brute-force check of monotonicity, subadditivity and no-externalities over
/// `type_space[i]` (the types of buyer `i`) and all pairs of item sets.
pub fn check_structure<V: Valuation + ?Sized>(
    v: &V,
    type_space: &[Vec<Vec<Rat>>],
    caps: &Caps,
) -> Result<StructureReport> {
    let m = v.num_items();
    caps.guard_subset("structure check", m as u32)?;
    let types: u128 = type_space.iter().map(|t| t.len() as u128).sum();
    let sets = 1u128 << m;
    caps.guard_joint("structure check", types * sets * sets)?;
    let full = ItemSet::full(m);
    let mut report =
        StructureReport { monotone: true, subadditive: true, no_externalities: true, first_violation: None };
    let note = |report: &mut StructureReport, viol: Violation| {
        match viol.property {
            Property::Monotone => report.monotone = false,
            Property::Subadditive => report.subadditive = false,
            Property::NoExternalities => report.no_externalities = false,
        }
        if report.first_violation.is_none() {
            report.first_violation = Some(viol);
        }
    };
    for (i, tys) in type_space.iter().enumerate() {
        for ty in tys {
            let vals: Vec<Rat> = full.subsets().map(|s| v.value(i, ty, s)).collect();
            for u in full.subsets() {
                for w in full.subsets() {
                    let vu = &vals[u.bits() as usize];
                    let vw = &vals[w.bits() as usize];
                    if u.is_subset(w) && vu > vw && report.monotone {
                        note(
                            &mut report,
                            Violation {
                                property: Property::Monotone,
                                buyer: i,
                                ty: ty.clone(),
                                other_type: None,
                                sets: vec![u, w],
                            },
                        );
                    }
                    let vuw = &vals[u.union(w).bits() as usize];
                    if vuw > &(vu + vw) && report.subadditive {
                        note(
                            &mut report,
                            Violation {
                                property: Property::Subadditive,
                                buyer: i,
                                ty: ty.clone(),
                                other_type: None,
                                sets: vec![u, w],
                            },
                        );
                    }
                }
            }
        }
        // No externalities: types agreeing on S must value S equally.
        for (a, ta) in tys.iter().enumerate() {
            for tb in tys.iter().skip(a + 1) {
                for s in full.subsets() {
                    let agree = s.iter().all(|j| ta[j] == tb[j]);
                    if agree && report.no_externalities && v.value(i, ta, s) != v.value(i, tb, s) {
                        note(
                            &mut report,
                            Violation {
                                property: Property::NoExternalities,
                                buyer: i,
                                ty: ta.clone(),
                                other_type: Some(tb.clone()),
                                sets: vec![s],
                            },
                        );
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Largest possible `sum_{j in S} p_j` over prices with `sum_{j in S'} p_j <= v(t, S')`
/// for all `S' ⊆ S`.
fn max_supported_total<V: Valuation + ?Sized>(v: &V, buyer: usize, ty: &[Rat], set: ItemSet) -> Result<Rat> {
    let items: Vec<usize> = set.iter().collect();
    let mut lp = LinearProgram::new();
    let vars: Vec<usize> = items.iter().map(|_| lp.add_var(Rat::one())).collect();
    for sub in set.subsets().skip(1) {
        let coeffs =
            items.iter().zip(&vars).filter(|(j, _)| sub.contains(**j)).map(|(_, x)| (*x, Rat::one())).collect();
        lp.add_constraint(coeffs, Relation::Le, v.value(buyer, ty, sub));
    }
    Ok(lp.solve(PivotRule::Dantzig)?.objective)
}

/// The supporting-price factor `alpha_v`.
///
/// XOS valuations always admit 1-supporting prices. For other valuations the
/// smallest valid `alpha` is found exactly by a price LP per `(t_i, S)`; the
/// valuation must be verified subadditive first.
pub fn alpha_of(v: &AnyValuation, type_space: &[Vec<Vec<Rat>>], caps: &Caps) -> Result<Rat> {
    if let AnyValuation::Xos(_) = v {
        return Ok(Rat::one());
    }
    let structure = check_structure(v, type_space, caps)?;
    if !structure.subadditive {
        return Err(Error::NoSupportingPrices("valuation is not subadditive".into()));
    }
    let full = ItemSet::full(v.num_items());
    let mut alpha = Rat::one();
    for (i, tys) in type_space.iter().enumerate() {
        for ty in tys {
            for s in full.subsets().skip(1) {
                let target = v.value(i, ty, s);
                if target.is_zero() {
                    continue;
                }
                let best = max_supported_total(v, i, ty, s)?;
                if best.is_zero() {
                    return Err(Error::NoSupportingPrices(format!(
                        "buyer {i}, type {ty:?}, set {s:?}: only zero prices are supported"
                    )));
                }
                let needed = &target / &best;
                if needed > alpha {
                    alpha = needed;
                }
            }
        }
    }
    Ok(alpha)
}
