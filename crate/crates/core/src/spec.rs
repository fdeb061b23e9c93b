//! Declarative potential specification and its TOML document format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Monomial;

pub const DEFAULT_SEEDS_PER_AXIS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllKind {
    Zero,
    SkewPoly,
}

impl EllKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EllKind::Zero => "zero",
            EllKind::SkewPoly => "skew_poly",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub dimension: usize,
    pub terms: Vec<Monomial>,
    pub ell_kind: EllKind,
    /// J_0..J_p as row lists; J(a) = Σ_k J_k a^k.
    pub skew: Vec<Vec<Vec<f64>>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level_h: f64,
    pub epsilons: Vec<f64>,
    pub r0: f64,
    pub seed: u64,
    pub seeds_per_axis: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    dimension: i64,
    #[serde(rename = "level_H")]
    level_h: f64,
    epsilons: Vec<f64>,
    r0: f64,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seeds_per_axis: Option<i64>,
    potential: PotentialDoc,
    ell: EllDoc,
    domain: DomainDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialDoc {
    terms: Vec<TermDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    coeff: f64,
    powers: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EllDoc {
    kind: String,
    #[serde(rename = "J", default, skip_serializing_if = "Vec::is_empty")]
    j: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainDoc {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn check_len(field: String, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            field,
            expected,
            found,
        })
    }
}

fn check_finite(field: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(parse_err(format!("{field}[{i}] is not finite"))),
        None => Ok(()),
    }
}

impl PotentialSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Document = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        Self::from_document(doc)
    }

    fn from_document(doc: Document) -> Result<Self> {
        if doc.dimension < 1 {
            return Err(parse_err("dimension must be a positive integer"));
        }
        let d = doc.dimension as usize;

        let mut terms = Vec::with_capacity(doc.potential.terms.len());
        for (i, t) in doc.potential.terms.iter().enumerate() {
            check_len(format!("potential.terms[{i}].powers"), d, t.powers.len())?;
            if !t.coeff.is_finite() {
                return Err(parse_err(format!("potential.terms[{i}].coeff is not finite")));
            }
            let mut powers = Vec::with_capacity(d);
            for (k, &p) in t.powers.iter().enumerate() {
                if !(0..=i64::from(u16::MAX)).contains(&p) {
                    return Err(parse_err(format!(
                        "potential.terms[{i}].powers[{k}] must be a non-negative integer"
                    )));
                }
                powers.push(p as u32);
            }
            terms.push(Monomial {
                coeff: t.coeff,
                powers,
            });
        }
        if terms.is_empty() {
            return Err(parse_err("potential.terms must not be empty"));
        }

        let ell_kind = match doc.ell.kind.as_str() {
            "zero" => EllKind::Zero,
            "skew_poly" => EllKind::SkewPoly,
            other => {
                return Err(parse_err(format!(
                    "ell.kind must be \"zero\" or \"skew_poly\", found \"{other}\""
                )))
            }
        };
        match ell_kind {
            EllKind::Zero if !doc.ell.j.is_empty() => {
                return Err(parse_err("ell.J given with ell.kind = \"zero\""));
            }
            EllKind::SkewPoly if doc.ell.j.is_empty() => {
                return Err(parse_err("ell.kind = \"skew_poly\" requires ell.J"));
            }
            _ => {}
        }
        for (k, mat) in doc.ell.j.iter().enumerate() {
            check_len(format!("ell.J[{k}]"), d, mat.len())?;
            for (r, row) in mat.iter().enumerate() {
                check_len(format!("ell.J[{k}][{r}]"), d, row.len())?;
                check_finite(&format!("ell.J[{k}][{r}]"), row)?;
            }
            for r in 0..d {
                for c in 0..=r {
                    if mat[r][c] + mat[c][r] != 0.0 {
                        return Err(Error::NotSkew {
                            index: k,
                            row: r + 1,
                            col: c + 1,
                        });
                    }
                }
            }
        }

        check_len("domain.lower".into(), d, doc.domain.lower.len())?;
        check_len("domain.upper".into(), d, doc.domain.upper.len())?;
        check_finite("domain.lower", &doc.domain.lower)?;
        check_finite("domain.upper", &doc.domain.upper)?;
        if let Some(k) = (0..d).find(|&k| doc.domain.lower[k] >= doc.domain.upper[k]) {
            return Err(parse_err(format!("domain.lower[{k}] must be below domain.upper[{k}]")));
        }
        if !doc.level_h.is_finite() {
            return Err(parse_err("level_H is not finite"));
        }
        if !(doc.r0.is_finite() && doc.r0 > 0.0) {
            return Err(parse_err("r0 must be a positive real"));
        }
        if doc.epsilons.is_empty() {
            return Err(parse_err("epsilons must not be empty"));
        }
        if let Some(i) = doc.epsilons.iter().position(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(parse_err(format!("epsilons[{i}] must be a positive real")));
        }
        let seeds_per_axis = match doc.seeds_per_axis {
            None => DEFAULT_SEEDS_PER_AXIS,
            Some(n) if n >= 2 => n as usize,
            Some(_) => return Err(parse_err("seeds_per_axis must be at least 2")),
        };

        Ok(Self {
            dimension: d,
            terms,
            ell_kind,
            skew: doc.ell.j,
            lower: doc.domain.lower,
            upper: doc.domain.upper,
            level_h: doc.level_h,
            epsilons: doc.epsilons,
            r0: doc.r0,
            seed: doc.seed,
            seeds_per_axis,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        let doc = Document {
            dimension: self.dimension as i64,
            level_h: self.level_h,
            epsilons: self.epsilons.clone(),
            r0: self.r0,
            seed: self.seed,
            seeds_per_axis: (self.seeds_per_axis != DEFAULT_SEEDS_PER_AXIS)
                .then_some(self.seeds_per_axis as i64),
            potential: PotentialDoc {
                terms: self
                    .terms
                    .iter()
                    .map(|t| TermDoc {
                        coeff: t.coeff,
                        powers: t.powers.iter().map(|&p| i64::from(p)).collect(),
                    })
                    .collect(),
            },
            ell: EllDoc {
                kind: self.ell_kind.as_str().to_string(),
                j: self.skew.clone(),
            },
            domain: DomainDoc {
                lower: self.lower.clone(),
                upper: self.upper.clone(),
            },
        };
        toml::to_string(&doc).map_err(|e| parse_err(e.to_string()))
    }

    /// Same spec with every skew matrix multiplied by `c`.
    pub fn with_skew_scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for mat in &mut out.skew {
            for row in mat.iter_mut() {
                for v in row.iter_mut() {
                    *v *= c;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOUBLE_WELL: &str = r#"
dimension = 2
level_H = 1.0
epsilons = [0.1, 0.05]
r0 = 0.45
seed = 7

[potential]
terms = [
  { coeff = 1.0, powers = [4, 0] },
  { coeff = -2.0, powers = [2, 0] },
  { coeff = 1.0, powers = [0, 0] },
  { coeff = 1.0, powers = [0, 2] },
]

[ell]
kind = "zero"

[domain]
lower = [-2.0, -2.0]
upper = [2.0, 2.0]
"#;

    #[test]
    fn parses_double_well() {
        let spec = PotentialSpec::parse(DOUBLE_WELL).unwrap();
        assert_eq!(spec.dimension, 2);
        assert_eq!(spec.terms.len(), 4);
        assert_eq!(spec.ell_kind, EllKind::Zero);
        assert_eq!(spec.seeds_per_axis, DEFAULT_SEEDS_PER_AXIS);
    }

    #[test]
    fn round_trip() {
        let spec = PotentialSpec::parse(DOUBLE_WELL).unwrap();
        let text = spec.to_toml().unwrap();
        assert_eq!(PotentialSpec::parse(&text).unwrap(), spec);
    }

    #[test]
    fn rejects_non_skew() {
        let text = DOUBLE_WELL.replace(
            "kind = \"zero\"",
            "kind = \"skew_poly\"\nJ = [[[0.0, 1.0], [0.0, 0.0]]]",
        );
        let err = PotentialSpec::parse(&text).unwrap_err();
        assert_eq!(err.to_string(), "matrix J_0 not skew-symmetric at (2,1)");
    }

    #[test]
    fn rejects_short_exponent_vector() {
        let text = DOUBLE_WELL.replace("powers = [0, 2]", "powers = [2]");
        match PotentialSpec::parse(&text).unwrap_err() {
            Error::Dimension { field, .. } => assert_eq!(field, "potential.terms[3].powers"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = PotentialSpec::parse("dimension = \nlevel_H = 1").unwrap_err();
        assert!(err.is_parse());
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = DOUBLE_WELL.replace("seed = 7", "seed = 7\nbogus = 1");
        assert!(PotentialSpec::parse(&text).unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn coefficients_parse_bit_exact() {
        let text = DOUBLE_WELL.replace("coeff = -2.0", "coeff = -2.0000000000000004");
        let spec = PotentialSpec::parse(&text).unwrap();
        assert_eq!(spec.terms[1].coeff.to_bits(), (-2.0000000000000004f64).to_bits());
    }
}
