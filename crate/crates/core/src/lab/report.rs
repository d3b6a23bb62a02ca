use serde::{Deserialize, Serialize};

use crate::rational::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: &Rat, rhs: &Rat) -> bool {
        match self {
            Relation::Ge => lhs >= rhs,
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Le => "<=",
            Relation::Eq => "==",
        }
    }
}

/// How much a verdict certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Both sides are exact optima or exact expectations.
    Exact,
    /// At least one side is only bounded; a pass is certified, a miss may be inconclusive.
    Bracket,
    /// Depends on heuristic mechanism parameters; informative only.
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One checked inequality `lhs REL rhs`.
///
/// In the bracket regime `lhs` and `rhs` are the sides that certify a pass
/// (lower bound of a `>=` left side, upper bound of its right side);
/// `lhs_far`/`rhs_far` are the opposite ends, used to certify a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub instance: String,
    pub anchor: String,
    pub lhs: Rat,
    pub rhs: Rat,
    pub relation: Relation,
    pub regime: Regime,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lhs_far: Option<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs_far: Option<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub millis: u64,
}

impl CheckRecord {
    pub fn exact(name: &str, anchor: &str, lhs: Rat, relation: Relation, rhs: Rat) -> Self {
        CheckRecord::build(name, anchor, lhs, relation, rhs, Regime::Exact, None, None)
    }

    pub fn diagnostic(name: &str, anchor: &str, lhs: Rat, relation: Relation, rhs: Rat) -> Self {
        CheckRecord::build(name, anchor, lhs, relation, rhs, Regime::Diagnostic, None, None)
    }

    /// `lhs`/`rhs` certify a pass; `lhs_far`/`rhs_far` (when known) certify a failure.
    pub fn bracket(
        name: &str,
        anchor: &str,
        lhs: Rat,
        relation: Relation,
        rhs: Rat,
        lhs_far: Option<Rat>,
        rhs_far: Option<Rat>,
    ) -> Self {
        CheckRecord::build(name, anchor, lhs, relation, rhs, Regime::Bracket, lhs_far, rhs_far)
    }

    /// A check that could not be evaluated (for example a cap tripped). It has no sides.
    pub fn skipped(name: &str, anchor: &str, regime: Regime, why: String) -> Self {
        CheckRecord {
            name: name.into(),
            instance: String::new(),
            anchor: anchor.into(),
            lhs: Rat::zero(),
            rhs: Rat::zero(),
            relation: Relation::Ge,
            regime,
            verdict: Verdict::Inconclusive,
            lhs_far: None,
            rhs_far: None,
            note: Some(why),
            millis: 0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        name: &str,
        anchor: &str,
        lhs: Rat,
        relation: Relation,
        rhs: Rat,
        regime: Regime,
        lhs_far: Option<Rat>,
        rhs_far: Option<Rat>,
    ) -> Self {
        let mut rec = CheckRecord {
            name: name.into(),
            instance: String::new(),
            anchor: anchor.into(),
            lhs,
            rhs,
            relation,
            regime,
            verdict: Verdict::Inconclusive,
            lhs_far,
            rhs_far,
            note: None,
            millis: 0,
        };
        rec.verdict = rec.derive_verdict();
        rec
    }

    /// The verdict is a function of the recorded sides only.
    pub fn derive_verdict(&self) -> Verdict {
        if self.relation.holds(&self.lhs, &self.rhs) {
            return Verdict::Pass;
        }
        if self.regime != Regime::Bracket {
            return Verdict::Fail;
        }
        match (&self.lhs_far, &self.rhs_far) {
            (Some(l), Some(r)) if !self.relation.holds(l, r) => Verdict::Fail,
            _ => Verdict::Inconclusive,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// `lhs / rhs` when `rhs` is non-zero.
    pub fn ratio(&self) -> Option<Rat> {
        (!self.rhs.is_zero()).then(|| &self.lhs / &self.rhs)
    }

    /// Failures that count against the run: exact or bracket records that are certified failures.
    pub fn is_blocking_failure(&self) -> bool {
        self.verdict == Verdict::Fail && self.regime != Regime::Diagnostic
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub version: String,
    pub suite: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn new(seed: u64, suite: &str, records: Vec<CheckRecord>) -> Self {
        Report { meta: ReportMeta { seed, version: env!("CARGO_PKG_VERSION").into(), suite: suite.into() }, records }
    }

    pub fn passed(&self) -> bool {
        !self.records.iter().any(CheckRecord::is_blocking_failure)
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.records.iter().filter(|r| r.verdict == verdict).count()
    }

    /// One row per record; rationals as `a` or `a/b`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,name,lhs,relation,rhs,regime,verdict,millis,anchor,note\n");
        for r in &self.records {
            let fields = [
                r.instance.clone(),
                r.name.clone(),
                r.lhs.to_string(),
                r.relation.symbol().to_string(),
                r.rhs.to_string(),
                format!("{:?}", r.regime).to_lowercase(),
                format!("{:?}", r.verdict).to_lowercase(),
                r.millis.to_string(),
                r.anchor.clone(),
                r.note.clone().unwrap_or_default(),
            ];
            let row: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
