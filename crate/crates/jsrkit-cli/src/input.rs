use anyhow::{bail, Context};
use jsrkit::ratio::{alpha_grid, hmst_family};
use jsrkit::stability::MarkovChainSpec;
use jsrkit::{Error, Matrix, MatrixSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMatrix {
    #[serde(default)]
    pub name: Option<String>,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

/// A one-parameter family: members listed in `scaled` (1-based) are
/// multiplied by the parameter, the rest are fixed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub base: Vec<NamedMatrix>,
    pub scaled: Vec<usize>,
    #[serde(default)]
    pub grid: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    pub dim: usize,
    #[serde(default)]
    pub matrices: Vec<NamedMatrix>,
    #[serde(default)]
    pub chain: Option<MarkovChainSpec>,
    #[serde(default)]
    pub family: Option<FamilySpec>,
}

pub struct LoadedInput {
    pub doc: InputDocument,
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load(path: &str) -> anyhow::Result<LoadedInput> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {path}"))?;
    let doc: InputDocument =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {path}"))?;
    validate(&doc)?;
    Ok(LoadedInput {
        doc,
        hash: sha256_hex(&bytes),
    })
}

fn build(d: usize, list: &[NamedMatrix]) -> jsrkit::Result<MatrixSet> {
    let mut mats = Vec::with_capacity(list.len());
    for (k, m) in list.iter().enumerate() {
        let im_ok =
            m.im.as_ref()
                .map_or(true, |im| im.len() == d && im.iter().all(|r| r.len() == d));
        if m.re.len() != d || m.re.iter().any(|r| r.len() != d) || !im_ok {
            return Err(Error::Dimension(format!("matrix {} is not {d}x{d}", k + 1)));
        }
        mats.push(Matrix::from_parts(&m.re, m.im.as_deref())?);
    }
    let set = MatrixSet::new(mats)?;
    if list.iter().all(|m| m.name.is_some()) {
        return set.with_labels(
            list.iter()
                .map(|m| m.name.clone().unwrap_or_default())
                .collect(),
        );
    }
    Ok(set)
}

fn validate(doc: &InputDocument) -> anyhow::Result<()> {
    if doc.dim == 0 {
        bail!(Error::Dimension("dim must be positive".into()));
    }
    if doc.matrices.is_empty() && doc.family.is_none() {
        bail!(Error::Dimension(
            "input has neither matrices nor a family".into()
        ));
    }
    if !doc.matrices.is_empty() {
        build(doc.dim, &doc.matrices)?;
    }
    if let Some(f) = &doc.family {
        build(doc.dim, &f.base)?;
        if let Some(&k) = f.scaled.iter().find(|&&k| k == 0 || k > f.base.len()) {
            bail!(Error::IndexOutOfRange {
                symbol: k,
                alphabet: f.base.len()
            });
        }
    }
    if let Some(c) = &doc.chain {
        c.validate()?;
        if !doc.matrices.is_empty() && c.states() != doc.matrices.len() {
            bail!(Error::Dimension(format!(
                "chain has {} states for {} matrices",
                c.states(),
                doc.matrices.len()
            )));
        }
    }
    Ok(())
}

impl InputDocument {
    pub fn set(&self) -> jsrkit::Result<MatrixSet> {
        if self.matrices.is_empty() {
            return Err(Error::Dimension("input has no matrices".into()));
        }
        build(self.dim, &self.matrices)
    }
}

pub enum Family {
    Hmst,
    Custom(FamilySpec, usize),
}

impl Family {
    pub fn at(&self, alpha: f64) -> jsrkit::Result<MatrixSet> {
        match self {
            Family::Hmst => hmst_family(alpha),
            Family::Custom(spec, d) => {
                let base = build(*d, &spec.base)?;
                let mats = base
                    .matrices()
                    .iter()
                    .enumerate()
                    .map(|(k, m)| {
                        if spec.scaled.contains(&(k + 1)) {
                            m.scale_real(alpha)
                        } else {
                            m.clone()
                        }
                    })
                    .collect();
                MatrixSet::new(mats)
            }
        }
    }
}

/// "start:end:step"
pub fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!(Error::Domain(format!(
            "grid must be start:end:step, got {text}"
        )));
    }
    let nums = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad grid value {p}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(alpha_grid(nums[0], nums[1], nums[2])?)
}
