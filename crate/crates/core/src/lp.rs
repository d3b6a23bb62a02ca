//! Dense two-phase simplex over exact rationals.
//!
//! Problems are stated as `maximize c·x` subject to linear rows with `<=`,
//! `>=` or `=` relations. Variables are non-negative unless declared free;
//! free variables are split into a positive and a negative part internally.
//!
//! Pivoting is always finite: [`PivotRule::Bland`] and
//! [`PivotRule::BlandReversed`] are Bland's rule under two opposite variable
//! orders, and [`PivotRule::Dantzig`] uses the largest reduced cost but drops
//! to Bland's rule for any run of degenerate pivots.

use crate::rational::Rat;

type Terms = Vec<(usize, Rat)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PivotRule {
    /// Smallest eligible index enters, smallest basic index leaves on ties.
    Bland,
    /// Bland's rule with the variable order reversed.
    BlandReversed,
    /// Largest reduced cost, Bland fallback while degenerate.
    #[default]
    Dantzig,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rat)>,
    pub relation: Relation,
    pub rhs: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: Rat,
    pub values: Vec<Rat>,
    pub pivots: usize,
}

/// A linear program in maximization form.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    objective: Vec<Rat>,
    free: Vec<bool>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a non-negative variable with the given objective coefficient.
    pub fn add_var(&mut self, obj: Rat) -> usize {
        self.objective.push(obj);
        self.free.push(false);
        self.objective.len() - 1
    }

    /// Adds an unrestricted variable.
    pub fn add_free_var(&mut self, obj: Rat) -> usize {
        let id = self.add_var(obj);
        self.free[id] = true;
        id
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, Rat)>, relation: Relation, rhs: Rat) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.objective.len()));
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Solves the program exactly.
    pub fn solve(&self, rule: PivotRule) -> Result<LpSolution, LpError> {
        Tableau::build(self).run(self, rule)
    }

    /// Checks `values` against every row and bound; used to audit solutions.
    pub fn is_feasible(&self, values: &[Rat]) -> bool {
        if values.len() != self.num_vars() {
            return false;
        }
        if values.iter().zip(&self.free).any(|(x, free)| !free && x.is_negative()) {
            return false;
        }
        self.constraints.iter().all(|c| {
            let lhs: Rat = c.coeffs.iter().map(|(j, a)| a * &values[*j]).sum();
            match c.relation {
                Relation::Le => lhs <= c.rhs,
                Relation::Ge => lhs >= c.rhs,
                Relation::Eq => lhs == c.rhs,
            }
        })
    }

    pub fn objective_value(&self, values: &[Rat]) -> Rat {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    /// Positive part of user variable.
    Pos(usize),
    /// Negative part of a free user variable.
    Neg(usize),
    Slack,
    Artificial,
}

struct Tableau {
    /// `rows x (cols + 1)`; the last column is the right-hand side.
    rows: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let mut kinds = Vec::new();
        let mut user_cols = Vec::with_capacity(lp.num_vars());
        for (j, free) in lp.free.iter().enumerate() {
            kinds.push(ColKind::Pos(j));
            let pos = kinds.len() - 1;
            let neg = if *free {
                kinds.push(ColKind::Neg(j));
                Some(kinds.len() - 1)
            } else {
                None
            };
            user_cols.push((pos, neg));
        }
        // Normalize every row to a non-negative right-hand side first.
        let normalized: Vec<(Terms, Relation, Rat)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs.is_negative() {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    let coeffs = c.coeffs.iter().map(|(j, a)| (*j, -a)).collect();
                    (coeffs, rel, -&c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();
        let mut slack_of = Vec::with_capacity(normalized.len());
        let mut art_of = Vec::with_capacity(normalized.len());
        for (_, rel, _) in &normalized {
            slack_of.push(match rel {
                Relation::Le | Relation::Ge => {
                    kinds.push(ColKind::Slack);
                    Some(kinds.len() - 1)
                }
                Relation::Eq => None,
            });
        }
        for (_, rel, _) in &normalized {
            art_of.push(match rel {
                Relation::Le => None,
                Relation::Ge | Relation::Eq => {
                    kinds.push(ColKind::Artificial);
                    Some(kinds.len() - 1)
                }
            });
        }
        let cols = kinds.len();
        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        for (r, (coeffs, rel, rhs)) in normalized.into_iter().enumerate() {
            let mut row = vec![Rat::zero(); cols + 1];
            for (j, a) in coeffs {
                let (pos, neg) = user_cols[j];
                row[pos] += &a;
                if let Some(neg) = neg {
                    row[neg] -= &a;
                }
            }
            match rel {
                Relation::Le => {
                    let s = slack_of[r].unwrap();
                    row[s] = Rat::one();
                    basis.push(s);
                }
                Relation::Ge => {
                    row[slack_of[r].unwrap()] = -Rat::one();
                    let a = art_of[r].unwrap();
                    row[a] = Rat::one();
                    basis.push(a);
                }
                Relation::Eq => {
                    let a = art_of[r].unwrap();
                    row[a] = Rat::one();
                    basis.push(a);
                }
            }
            row[cols] = rhs;
            rows.push(row);
        }
        Tableau { rows, basis, kinds, cols, pivots: 0 }
    }

    fn run(mut self, lp: &LinearProgram, rule: PivotRule) -> Result<LpSolution, LpError> {
        let has_artificial = self.kinds.contains(&ColKind::Artificial);
        if has_artificial {
            // Phase one: maximize -(sum of artificials).
            let cost: Vec<Rat> =
                self.kinds.iter().map(|k| if *k == ColKind::Artificial { -Rat::one() } else { Rat::zero() }).collect();
            let obj = self.optimize(&cost, rule, true)?;
            if obj.is_negative() {
                return Err(LpError::Infeasible);
            }
            self.expel_artificials();
        }
        let cost: Vec<Rat> = self
            .kinds
            .iter()
            .map(|k| match k {
                ColKind::Pos(j) => lp.objective[*j].clone(),
                ColKind::Neg(j) => -&lp.objective[*j],
                _ => Rat::zero(),
            })
            .collect();
        let objective = self.optimize(&cost, rule, false)?;
        let mut values = vec![Rat::zero(); lp.num_vars()];
        for (r, &b) in self.basis.iter().enumerate() {
            match self.kinds[b] {
                ColKind::Pos(j) => values[j] += &self.rows[r][self.cols],
                ColKind::Neg(j) => values[j] -= &self.rows[r][self.cols],
                _ => {}
            }
        }
        Ok(LpSolution { objective, values, pivots: self.pivots })
    }

    fn rank(&self, col: usize, rule: PivotRule) -> usize {
        match rule {
            PivotRule::BlandReversed => self.cols - 1 - col,
            _ => col,
        }
    }

    /// Runs primal simplex for `cost` from the current feasible basis.
    /// Returns the optimal objective value.
    fn optimize(&mut self, cost: &[Rat], rule: PivotRule, phase_one: bool) -> Result<Rat, LpError> {
        let cols = self.cols;
        // Reduced costs d_j = c_j - c_B B^-1 A_j; the objective value is c_B B^-1 b.
        let mut reduced: Vec<Rat> = cost.to_vec();
        reduced.push(Rat::zero());
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[r].iter().enumerate() {
                if !a.is_zero() {
                    reduced[j] = reduced[j].sub_mul(cb, a);
                }
            }
        }
        // reduced[cols] now holds -objective.
        let mut degenerate_run = 0usize;
        loop {
            let use_bland = match rule {
                PivotRule::Dantzig => degenerate_run > 0,
                _ => true,
            };
            let eligible = |j: usize| -> bool {
                reduced[j].is_positive() && !(!phase_one && self.kinds[j] == ColKind::Artificial)
            };
            let mut entering: Option<usize> = None;
            for j in 0..cols {
                if !eligible(j) {
                    continue;
                }
                entering = match entering {
                    None => Some(j),
                    Some(e) => {
                        let better =
                            if use_bland { self.rank(j, rule) < self.rank(e, rule) } else { reduced[j] > reduced[e] };
                        if better {
                            Some(j)
                        } else {
                            Some(e)
                        }
                    }
                };
            }
            let Some(pc) = entering else {
                return Ok(-&reduced[cols]);
            };
            // Ratio test; ties go to the basic variable of smallest rank.
            let mut leaving: Option<(usize, Rat)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = &row[pc];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &row[cols] / a;
                leaving = match leaving {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => match ratio.cmp(&lratio) {
                        std::cmp::Ordering::Less => Some((r, ratio)),
                        std::cmp::Ordering::Equal
                            if self.rank(self.basis[r], rule) < self.rank(self.basis[lr], rule) =>
                        {
                            Some((r, ratio))
                        }
                        _ => Some((lr, lratio)),
                    },
                };
            }
            let Some((pr, ratio)) = leaving else {
                return Err(LpError::Unbounded);
            };
            if ratio.is_zero() {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc, Some(&mut reduced));
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize, reduced: Option<&mut Vec<Rat>>) {
        self.pivots += 1;
        let piv = self.rows[pr][pc].clone();
        if piv != Rat::one() {
            let inv = piv.recip();
            for a in self.rows[pr].iter_mut() {
                if !a.is_zero() {
                    *a *= &inv;
                }
            }
        }
        let nz: Vec<usize> = (0..=self.cols).filter(|&j| !self.rows[pr][j].is_zero()).collect();
        let pivot_row = std::mem::take(&mut self.rows[pr]);
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == pr {
                continue;
            }
            let factor = row[pc].clone();
            if factor.is_zero() {
                continue;
            }
            for &j in &nz {
                row[j] = row[j].sub_mul(&factor, &pivot_row[j]);
            }
        }
        if let Some(reduced) = reduced {
            let factor = reduced[pc].clone();
            if !factor.is_zero() {
                for &j in &nz {
                    reduced[j] = reduced[j].sub_mul(&factor, &pivot_row[j]);
                }
            }
        }
        self.rows[pr] = pivot_row;
        self.basis[pr] = pc;
    }

    /// After phase one: pivot basic artificials out or drop redundant rows,
    /// then remove artificial columns from consideration.
    fn expel_artificials(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.kinds[self.basis[r]] != ColKind::Artificial {
                r += 1;
                continue;
            }
            let col = (0..self.cols).find(|&j| self.kinds[j] != ColKind::Artificial && !self.rows[r][j].is_zero());
            match col {
                Some(j) => {
                    self.pivot(r, j, None);
                    r += 1;
                }
                None => {
                    self.rows.remove(r);
                    self.basis.remove(r);
                }
            }
        }
        // Artificial columns stay in the tableau but are never eligible again.
        for row in &mut self.rows {
            for (j, a) in row.iter_mut().enumerate().take(self.cols) {
                if self.kinds[j] == ColKind::Artificial {
                    *a = Rat::zero();
                }
            }
        }
    }
}
