//! Parser for model strings such as `clayton(th=2,d=3)`, `gaussian:R.json`
//! or `nested-gumbel(th0=3; th1=3,d1=2; th2=4,d2=2)`.
//!
//! A bare family name (`gumbel`, `nested-clayton`, ...) leaves the parameters
//! open; `fit` and `estimate` then take the grouping from `--groups`.

use std::path::PathBuf;

use phidep::mle::{archimedean_template, nested_template};
use phidep::{ArchimedeanGenerator, BlockCorrelationMatrix, CopulaModel, Error, Family, GroupStructure, NestedArchimedeanCopula, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Gaussian(Option<PathBuf>),
    Archimedean { family: Family, theta: Option<f64>, dim: Option<usize> },
    Nested { family: Family, theta0: Option<f64>, children: Vec<(f64, usize)> },
}

fn family(name: &str) -> Option<Family> {
    match name {
        "gumbel" => Some(Family::Gumbel),
        "clayton" => Some(Family::Clayton),
        _ => None,
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse(format!("bad value {value:?} for {key}")))
}

/// `key=value` pairs separated by `,` or `;`.
fn pairs(body: &str) -> Result<Vec<(String, String)>> {
    body.split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {item:?}")))
        })
        .collect()
}

impl std::str::FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("gaussian") {
            return match rest.strip_prefix(':') {
                Some(path) if !path.is_empty() => Ok(ModelSpec::Gaussian(Some(PathBuf::from(path)))),
                None if rest.is_empty() => Ok(ModelSpec::Gaussian(None)),
                _ => Err(Error::Parse(format!("bad gaussian model spec {s:?}; use gaussian or gaussian:R.json"))),
            };
        }
        let (name, body) = match s.split_once('(') {
            Some((name, rest)) => {
                let body = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Parse(format!("missing closing parenthesis in {s:?}")))?;
                (name.trim(), Some(body))
            }
            None => (s, None),
        };
        let kv = body.map(pairs).transpose()?.unwrap_or_default();
        if let Some(f) = name.strip_prefix("nested-").and_then(family) {
            let mut theta0 = None;
            let mut thetas: Vec<Option<f64>> = Vec::new();
            let mut dims: Vec<Option<usize>> = Vec::new();
            for (k, v) in &kv {
                let slot = |prefix: &str| -> Option<usize> { k.strip_prefix(prefix)?.parse::<usize>().ok() };
                if k == "th0" || k == "theta0" {
                    theta0 = Some(number(k, v)?);
                } else if let Some(i) = slot("theta").or_else(|| slot("th")).filter(|&i| i > 0) {
                    thetas.resize(thetas.len().max(i), None);
                    thetas[i - 1] = Some(number(k, v)?);
                } else if let Some(i) = slot("d").filter(|&i| i > 0) {
                    dims.resize(dims.len().max(i), None);
                    dims[i - 1] = Some(number(k, v)?);
                } else {
                    return Err(Error::Parse(format!("unknown key {k:?} in {s:?}")));
                }
            }
            let k = thetas.len().max(dims.len());
            let children = (0..k)
                .map(|i| match (thetas.get(i).copied().flatten(), dims.get(i).copied().flatten()) {
                    (Some(t), Some(d)) => Ok((t, d)),
                    _ => Err(Error::Parse(format!("child {} needs both th{0} and d{0} in {s:?}", i + 1))),
                })
                .collect::<Result<Vec<_>>>()?;
            if theta0.is_some() && children.is_empty() {
                return Err(Error::Parse(format!("nested model {s:?} has a root parameter but no children")));
            }
            if theta0.is_none() && !children.is_empty() {
                return Err(Error::Parse(format!("nested model {s:?} needs th0")));
            }
            return Ok(ModelSpec::Nested { family: f, theta0, children });
        }
        if let Some(f) = family(name) {
            let mut theta = None;
            let mut dim = None;
            for (k, v) in &kv {
                match k.as_str() {
                    "th" | "theta" => theta = Some(number(k, v)?),
                    "d" => dim = Some(number(k, v)?),
                    _ => return Err(Error::Parse(format!("unknown key {k:?} in {s:?}"))),
                }
            }
            return Ok(ModelSpec::Archimedean { family: f, theta, dim });
        }
        Err(Error::Parse(format!(
            "unknown model {name:?}; expected gaussian, gumbel, clayton, nested-gumbel or nested-clayton"
        )))
    }
}

impl ModelSpec {
    pub fn is_gaussian(&self) -> bool {
        matches!(self, ModelSpec::Gaussian(_))
    }

    /// Parameters written in the spec, in model order.
    pub fn explicit_params(&self) -> Option<Vec<f64>> {
        match self {
            ModelSpec::Gaussian(_) => None,
            ModelSpec::Archimedean { theta, .. } => theta.map(|t| vec![t]),
            ModelSpec::Nested { theta0, children, .. } => {
                theta0.map(|t0| std::iter::once(t0).chain(children.iter().map(|c| c.0)).collect())
            }
        }
    }

    /// Parametric template over `groups`, used as the fitting family.
    pub fn template(&self, groups: &GroupStructure) -> Result<CopulaModel> {
        match self {
            ModelSpec::Gaussian(_) => Err(Error::InvalidParameter("the Gaussian copula is estimated without fitting".into())),
            ModelSpec::Archimedean { family, dim, .. } => {
                if let Some(d) = dim {
                    if *d != groups.q() {
                        return Err(Error::Dimension(format!("model dimension {d} does not match {} columns", groups.q())));
                    }
                }
                archimedean_template(*family, groups.clone())
            }
            ModelSpec::Nested { family, children, .. } => {
                if !children.is_empty() {
                    let dims: Vec<usize> = children.iter().map(|c| c.1).collect();
                    if dims != groups.sizes() {
                        return Err(Error::Dimension(format!("nested child sizes {dims:?} do not match groups {:?}", groups.sizes())));
                    }
                }
                nested_template(*family, groups)
            }
        }
    }

    /// Fully specified model for simulation. `groups` overrides the default
    /// grouping of a plain Archimedean model (one variable per group).
    pub fn model(&self, groups: Option<&GroupStructure>) -> Result<CopulaModel> {
        match self {
            ModelSpec::Gaussian(path) => {
                let path = path
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("simulation needs a correlation matrix: gaussian:R.json".into()))?;
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let r: BlockCorrelationMatrix =
                    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                if let Some(g) = groups {
                    if g != r.structure() {
                        return Err(Error::Dimension(format!(
                            "--groups {:?} disagrees with the sizes {:?} in {}",
                            g.sizes(),
                            r.structure().sizes(),
                            path.display()
                        )));
                    }
                }
                Ok(CopulaModel::Gaussian(r))
            }
            ModelSpec::Archimedean { family, theta, dim } => {
                let theta = theta.ok_or_else(|| Error::InvalidParameter("simulation needs th=...".into()))?;
                let structure = match (groups, dim) {
                    (Some(g), Some(d)) if g.q() != *d => {
                        return Err(Error::Dimension(format!("--groups covers {} columns but d={d}", g.q())))
                    }
                    (Some(g), _) => g.clone(),
                    (None, Some(d)) => GroupStructure::new(vec![1; *d])?,
                    (None, None) => return Err(Error::InvalidParameter("simulation needs d=... or --groups".into())),
                };
                Ok(CopulaModel::archimedean(ArchimedeanGenerator::new(*family, theta)?, structure))
            }
            ModelSpec::Nested { family, theta0, children } => {
                let theta0 = theta0.ok_or_else(|| Error::InvalidParameter("simulation needs th0 and the children".into()))?;
                let c = NestedArchimedeanCopula::from_params(*family, theta0, children)?;
                if let Some(g) = groups {
                    if g != c.structure() {
                        return Err(Error::Dimension(format!("--groups {:?} disagrees with the nested sizes", g.sizes())));
                    }
                }
                Ok(CopulaModel::Nested(c))
            }
        }
    }
}
