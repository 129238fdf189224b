use serde::{Deserialize, Serialize};

use crate::dens::GridConfig;

/// Where a side of an inequality came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Computed numerically on a grid or by quadrature.
    Measured,
    /// Analytic formula.
    ClosedForm,
    /// Formula in the moments of the law.
    MomentFormula,
    /// Exact finite-support computation.
    Exact,
}

/// Orientation of the inequality `lhs ⋚ rhs` that should hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `lhs ≤ rhs`.
    Le,
    /// `lhs ≥ rhs`.
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Side {
    #[serde(with = "crate::serde_inf")]
    pub value: f64,
    pub provenance: Provenance,
}

impl Side {
    pub fn new(value: f64, provenance: Provenance) -> Self {
        Self { value, provenance }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportContext {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<GridConfig>,
}

impl ReportContext {
    pub fn new(family: impl Into<String>) -> Self {
        Self {
            family: family.into(),
            ..Self::default()
        }
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn m(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }

    pub fn grid(mut self, grid: &GridConfig) -> Self {
        self.grid = Some(grid.clone());
        self
    }
}

/// One instance of an inequality: both sides, the oriented slack and the verdict.
///
/// `slack` is `rhs − lhs` for [`Relation::Le`] and `lhs − rhs` for [`Relation::Ge`],
/// so `pass ⇔ slack ≥ −tol` in either orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: Side,
    pub rhs: Side,
    pub relation: Relation,
    #[serde(with = "crate::serde_inf")]
    pub slack: f64,
    pub tol: f64,
    pub pass: bool,
    pub context: ReportContext,
}

impl BoundReport {
    pub fn new(
        name: impl Into<String>,
        lhs: Side,
        relation: Relation,
        rhs: Side,
        tol: f64,
        context: ReportContext,
    ) -> Self {
        let slack = match relation {
            Relation::Le => rhs.value - lhs.value,
            Relation::Ge => lhs.value - rhs.value,
        };
        // ∞ − ∞ is NaN; an infinite side on the permissive end always holds.
        let slack = if slack.is_nan() && lhs.value == rhs.value {
            0.0
        } else {
            slack
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            relation,
            slack,
            tol,
            pass: slack >= -tol,
            context,
        }
    }

    /// A two-sided agreement check `|measured − reference| ≤ tol`.
    pub fn agreement(
        name: impl Into<String>,
        measured: Side,
        reference: Side,
        tol: f64,
        context: ReportContext,
    ) -> Self {
        let diff = (measured.value - reference.value).abs();
        let slack = if measured.value == reference.value {
            0.0
        } else {
            -diff
        };
        Self {
            name: name.into(),
            lhs: measured,
            rhs: reference,
            relation: Relation::Le,
            slack,
            tol,
            pass: slack >= -tol,
            context,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation() {
        let ctx = ReportContext::new("test");
        let le = BoundReport::new(
            "le",
            Side::new(1.0, Provenance::Measured),
            Relation::Le,
            Side::new(2.0, Provenance::ClosedForm),
            0.0,
            ctx.clone(),
        );
        assert!(le.pass && le.slack == 1.0);
        let ge = BoundReport::new(
            "ge",
            Side::new(1.0, Provenance::Measured),
            Relation::Ge,
            Side::new(2.0, Provenance::ClosedForm),
            0.5,
            ctx.clone(),
        );
        assert!(!ge.pass && ge.slack == -1.0);
        let inf = BoundReport::new(
            "inf",
            Side::new(3.0, Provenance::Exact),
            Relation::Le,
            Side::new(f64::INFINITY, Provenance::ClosedForm),
            0.0,
            ctx,
        );
        assert!(inf.pass);
        let json = serde_json::to_string(&inf).unwrap();
        assert!(json.contains("\"inf\""));
    }

    #[test]
    fn agreement_is_symmetric() {
        let ctx = ReportContext::new("test");
        let r = BoundReport::agreement(
            "agree",
            Side::new(1.0, Provenance::Measured),
            Side::new(1.001, Provenance::ClosedForm),
            1e-2,
            ctx,
        );
        assert!(r.pass);
        assert!((r.slack + 0.001).abs() < 1e-12);
    }
}
