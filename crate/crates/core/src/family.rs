//! The sixteen-member constraint lattice over `(B, T, D-common, D-isotropic)`
//! and its fixed-`T` reductions to the older eight- and four-model families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One member of the model family.
///
/// Each flag is `true` when the corresponding letter of the code is `C`
/// (constrained). `t_fixed` pins every latent variance to one; such specs
/// are the legacy models and are named by their three-letter code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ModelSpec {
    pub b_common: bool,
    pub t_common: bool,
    pub d_common: bool,
    pub d_isotropic: bool,
    pub t_fixed: bool,
}

fn letter(constrained: bool) -> char {
    if constrained {
        'C'
    } else {
        'U'
    }
}

fn parse_letter(c: char) -> Result<bool> {
    match c {
        'U' | 'u' => Ok(false),
        'C' | 'c' => Ok(true),
        other => Err(Error::Parse(format!("model code letter must be U or C, got {other:?}"))),
    }
}

impl ModelSpec {
    pub const fn new(b_common: bool, t_common: bool, d_common: bool, d_isotropic: bool) -> Self {
        Self {
            b_common,
            t_common,
            d_common,
            d_isotropic,
            t_fixed: false,
        }
    }

    /// Fixed-`T` model with `T = I` (shared by construction).
    pub const fn legacy(b_common: bool, d_common: bool, d_isotropic: bool) -> Self {
        Self {
            b_common,
            t_common: true,
            d_common,
            d_isotropic,
            t_fixed: true,
        }
    }

    /// All sixteen free-`T` models, `UUUU` first and `CCCC` last.
    pub fn all() -> Vec<Self> {
        (0..16u8)
            .map(|bits| Self::new(bits & 8 != 0, bits & 4 != 0, bits & 2 != 0, bits & 1 != 0))
            .collect()
    }

    /// The eight fixed-`T` models in the order `UUU, UCU, CUU, CCU, UUC, UCC, CUC, CCC`.
    pub fn legacy_all() -> Vec<Self> {
        let mut out = Vec::with_capacity(8);
        for d_isotropic in [false, true] {
            for (b_common, d_common) in [(false, false), (false, true), (true, false), (true, true)] {
                out.push(Self::legacy(b_common, d_common, d_isotropic));
            }
        }
        out
    }

    /// Whether every component must share one column-cluster count.
    pub fn requires_shared_q(&self) -> bool {
        self.b_common || self.t_common
    }

    pub fn code(&self) -> String {
        if self.t_fixed {
            [self.b_common, self.d_common, self.d_isotropic].into_iter().map(letter).collect()
        } else {
            [self.b_common, self.t_common, self.d_common, self.d_isotropic]
                .into_iter()
                .map(letter)
                .collect()
        }
    }

    /// Parses a three-letter (`UCU`) or two-letter (`UC`, diagonal noise) legacy code.
    pub fn parse_legacy(code: &str) -> Result<Self> {
        let letters: Vec<char> = code.trim().chars().collect();
        match letters.as_slice() {
            [b, d] => Ok(Self::legacy(parse_letter(*b)?, parse_letter(*d)?, false)),
            [b, dc, di] => Ok(Self::legacy(parse_letter(*b)?, parse_letter(*dc)?, parse_letter(*di)?)),
            _ => Err(Error::Parse(format!("legacy model code must have 2 or 3 letters, got {code:?}"))),
        }
    }

    /// Same constraints with `T` freed.
    pub fn with_free_t(self, t_common: bool) -> Self {
        Self::new(self.b_common, t_common, self.d_common, self.d_isotropic)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Four letters name a free-`T` model; three letters a legacy one.
    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<char> = s.trim().chars().collect();
        match letters.as_slice() {
            [b, t, dc, di] => Ok(Self::new(
                parse_letter(*b)?,
                parse_letter(*t)?,
                parse_letter(*dc)?,
                parse_letter(*di)?,
            )),
            [_, _, _] => Self::parse_legacy(s),
            _ => Err(Error::Parse(format!("model code must have 4 letters, got {s:?}"))),
        }
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> Self {
        m.code()
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Column-cluster counts of a candidate after validation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Widths {
    Shared(usize),
    PerComponent(Vec<usize>),
}

impl Widths {
    pub fn per_component(&self, k: usize) -> Vec<usize> {
        match self {
            Widths::Shared(q) => vec![*q; k],
            Widths::PerComponent(qs) => qs.clone(),
        }
    }

    pub fn total(&self, k: usize) -> usize {
        self.per_component(k).iter().sum()
    }

    pub fn encode(&self) -> String {
        match self {
            Widths::Shared(q) => q.to_string(),
            Widths::PerComponent(qs) => qs.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        }
    }
}

impl fmt::Display for Widths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

/// Checks a `(spec, K, q)` combination and normalizes the widths.
///
/// A single width is broadcast to all components. Per-component widths are
/// only allowed when both `B` and `T` are unconstrained.
pub fn validate_spec(spec: ModelSpec, k: usize, q: &[usize], p: usize) -> Result<(ModelSpec, Widths)> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    if q.is_empty() || q.contains(&0) {
        return Err(Error::Config("every q_k must be at least 1".into()));
    }
    let widths = match q.len() {
        1 => vec![q[0]; k],
        len if len == k => q.to_vec(),
        len => return Err(Error::Dimension(format!("{len} widths supplied for K={k}"))),
    };
    if let Some(&big) = widths.iter().find(|&&w| w > p) {
        return Err(Error::Dimension(format!("q_k={big} exceeds p={p}")));
    }
    let all_equal = widths.iter().all(|&w| w == widths[0]);
    if spec.requires_shared_q() {
        if !all_equal {
            return Err(Error::Constraint(format!(
                "model {spec} shares B or T across components and needs equal q, got {widths:?}"
            )));
        }
        Ok((spec, Widths::Shared(widths[0])))
    } else if all_equal {
        Ok((spec, Widths::Shared(widths[0])))
    } else {
        Ok((spec, Widths::PerComponent(widths)))
    }
}

/// Number of free parameters `m`, following the family table row for `spec`.
pub fn parameter_count(spec: ModelSpec, p: usize, k: usize, q: &Widths) -> usize {
    let widths = q.per_component(k);
    let b = if spec.b_common { p } else { p * k };
    let t = if spec.t_fixed {
        0
    } else if spec.t_common {
        widths[0]
    } else {
        widths.iter().sum()
    };
    let d = match (spec.d_common, spec.d_isotropic) {
        (false, false) => p * k,
        (false, true) => k,
        (true, false) => p,
        (true, true) => 1,
    };
    b + t + d + (k - 1) + p * k
}

/// Legacy model naming for a spec reduced to `T = I` with shared `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LegacyLabel {
    /// Eight-model family code (`B`, `D`-common, `D`-isotropic).
    pub wong: &'static str,
    /// Four-model family code, present only for diagonal (non-isotropic) noise.
    pub martella: Option<&'static str>,
}

/// Maps a spec onto the fixed-`T` families, or `None` when `T` stays free
/// or the widths are not shared.
pub fn reduce_to_special_case(spec: ModelSpec, t_identity: bool, q_shared: bool) -> Option<LegacyLabel> {
    if !(t_identity && q_shared) {
        return None;
    }
    let wong = match (spec.b_common, spec.d_common, spec.d_isotropic) {
        (false, false, false) => "UUU",
        (false, true, false) => "UCU",
        (true, false, false) => "CUU",
        (true, true, false) => "CCU",
        (false, false, true) => "UUC",
        (false, true, true) => "UCC",
        (true, false, true) => "CUC",
        (true, true, true) => "CCC",
    };
    let martella = (!spec.d_isotropic).then(|| match (spec.b_common, spec.d_common) {
        (false, false) => "UU",
        (false, true) => "UC",
        (true, false) => "CU",
        (true, true) => "CC",
    });
    Some(LegacyLabel { wong, martella })
}
