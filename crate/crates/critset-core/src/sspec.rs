//! Decidable specifications of target sets S of square classes.

use std::collections::BTreeSet;

use crate::elements::{is_squarefree, SquareClass};
use crate::ring::FieldCtx;

/// A decidable subset of the square classes. `AllMinus` realizes the removal
/// of single classes (squared-unit multiples are excluded automatically
/// because membership is tested on canonical classes).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SSpec {
    All,
    Explicit(BTreeSet<SquareClass>),
    AllMinus(BTreeSet<SquareClass>),
    Squarefree,
    RationalIntegers,
}

impl SSpec {
    pub fn contains(&self, k: &FieldCtx, c: &SquareClass) -> bool {
        match self {
            SSpec::All => true,
            SSpec::Explicit(set) => set.contains(c),
            SSpec::AllMinus(set) => !set.contains(c),
            SSpec::Squarefree => is_squarefree(k, c.rep()).map(|r| r.squarefree).unwrap_or(false),
            // A class contains a rational element iff its canonical
            // representative is rational (rational elements have embedding
            // ratio 1, already inside the reduction window).
            SSpec::RationalIntegers => c.rep().is_rational(),
        }
    }

    /// Serialization tag for cache keys and reports.
    pub fn tag(&self) -> &'static str {
        match self {
            SSpec::All => "all",
            SSpec::Explicit(_) => "explicit",
            SSpec::AllMinus(_) => "all-minus",
            SSpec::Squarefree => "squarefree",
            SSpec::RationalIntegers => "rational-integers",
        }
    }
}
