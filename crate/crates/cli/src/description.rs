//! JSON system descriptions.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays of them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use vnspec::algebra::{MatrixStarAlgebra, StarAutomorphism, Subsystem, TraceFunctional, WStarSystem};
use vnspec::constructors::{
    build_classical_system, build_finite_extension, build_group_vn_system, build_skew_product, build_tensor_system,
    FiniteExtensionChecks, FiniteExtensionSpec, FiniteGroup, SkewProductSpec, Summand,
};
use vnspec::linalg::{c, unitarity_residual, CMatrix, Tolerances};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

pub type Matrix = Vec<Vec<[f64; 2]>>;

pub fn to_cmatrix(m: &Matrix, path: &str) -> Result<CMatrix, CliError> {
    let rows = m.len();
    if rows == 0 {
        return Err(CliError::validation(path, "matrix is empty"));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != rows {
            return Err(CliError::validation(
                format!("{path}[{i}]"),
                format!("row has {} entries, expected {rows} (matrices must be square)", row.len()),
            ));
        }
        if row.iter().flatten().any(|x| !x.is_finite()) {
            return Err(CliError::validation(format!("{path}[{i}]"), "entries must be finite"));
        }
    }
    Ok(CMatrix::from_fn(rows, rows, |i, j| c(m[i][j][0], m[i][j][1])))
}

pub fn from_cmatrix(m: &CMatrix) -> Matrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDescription {
    pub format_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub system: SystemSpec,
    /// Named mean-zero test elements for Cesàro averages.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub elements: BTreeMap<String, Matrix>,
    #[serde(default, skip_serializing_if = "ToleranceOverrides::is_empty")]
    pub tolerances: ToleranceOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_rank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_assert: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cesaro_n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_cluster: Option<f64>,
}

impl ToleranceOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, mut tol: Tolerances) -> Tolerances {
        if let Some(x) = self.eps_rank {
            tol.eps_rank = x;
        }
        if let Some(x) = self.eps_assert {
            tol.eps_assert = x;
        }
        if let Some(x) = self.cesaro_n_max {
            tol.cesaro_n_max = x;
        }
        if let Some(x) = self.extension_residual {
            tol.extension_residual = x;
        }
        if let Some(x) = self.eigen_cluster {
            tol.eigen_cluster = x;
        }
        tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Explicit {
        dim: usize,
        algebra: AlgebraSpec,
        /// Density of μ; the normalized trace when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<Matrix>,
        dynamics: DynamicsSpec,
        #[serde(default)]
        subalgebra: AlgebraSpec,
    },
    Classical {
        weights: Vec<f64>,
        permutation: Vec<usize>,
        #[serde(default)]
        subalgebra: AlgebraSpec,
    },
    GroupVn {
        group: GroupSpec,
        automorphism: Vec<usize>,
        #[serde(default)]
        subalgebra: AlgebraSpec,
    },
    /// `B ⊗ C` over `B ⊗ 1`; the subalgebras of the factors are ignored.
    Tensor { b: Box<SystemSpec>, c: Box<SystemSpec> },
    SkewProduct {
        weights: Vec<f64>,
        s: Vec<usize>,
        group: GroupSpec,
        t: Vec<usize>,
        k: Vec<i64>,
        /// Pass the T-orbit modules to the module search.
        #[serde(default = "default_true")]
        orbit_hints: bool,
    },
    FiniteExtension {
        b1: SummandSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b2: Option<SummandSpec>,
        s: f64,
        v1: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v2: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v3: Option<Matrix>,
        v4: Matrix,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraSpec {
    #[default]
    Scalars,
    Full,
    Diagonal,
    Center,
    Generated { generators: Vec<Matrix> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    Identity,
    Unitary { matrix: Matrix },
    Coordinates { matrix: Matrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSpec {
    Cyclic(usize),
    Table(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummandSpec {
    pub dim: usize,
    pub algebra: AlgebraSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Matrix>,
}

/// A description turned into core objects.
#[derive(Debug, Clone)]
pub struct BuiltSystem {
    pub subsystem: Subsystem,
    /// Validated projections onto known modules, with labels.
    pub hints: Vec<(String, CMatrix)>,
    /// `u_i ∈ A` with `Σ u_i e u_i* = 1`, when known.
    pub right_basis: Option<Vec<CMatrix>>,
    pub finite_extension: Option<FiniteExtensionChecks>,
    pub tensor_dims: Option<(usize, usize)>,
    pub elements: Vec<(String, CMatrix)>,
    pub tolerances: Tolerances,
}

pub fn parse(text: &str) -> Result<SystemDescription, CliError> {
    let desc: SystemDescription = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if desc.format_version != FORMAT_VERSION {
        return Err(CliError::validation(
            "format_version",
            format!("unsupported version {} (expected {FORMAT_VERSION})", desc.format_version),
        ));
    }
    Ok(desc)
}

pub fn emit(desc: &SystemDescription) -> String {
    serde_json::to_string_pretty(desc).expect("descriptions serialize")
}

fn core_err(path: &str, e: vnspec::Error) -> CliError {
    CliError::from_core(path, e)
}

fn algebra_from(spec: &AlgebraSpec, n: usize, path: &str, tol: &Tolerances) -> Result<MatrixStarAlgebra, CliError> {
    match spec {
        AlgebraSpec::Scalars => Ok(MatrixStarAlgebra::scalars(n)),
        AlgebraSpec::Full => Ok(MatrixStarAlgebra::full(n)),
        AlgebraSpec::Diagonal => Ok(MatrixStarAlgebra::diagonal(n)),
        AlgebraSpec::Center => Err(CliError::validation(path, "center is only valid for a subalgebra")),
        AlgebraSpec::Generated { generators } => {
            let gens = generators
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let p = format!("{path}.generators[{i}]");
                    let m = to_cmatrix(g, &p)?;
                    if m.nrows() != n {
                        return Err(CliError::validation(p, format!("expected a {n}x{n} matrix")));
                    }
                    Ok(m)
                })
                .collect::<Result<Vec<_>, _>>()?;
            MatrixStarAlgebra::generate(&gens, n, tol).map_err(|e| core_err(path, e))
        }
    }
}

fn subalgebra_from(
    spec: &AlgebraSpec,
    sys: &WStarSystem,
    path: &str,
    tol: &Tolerances,
) -> Result<MatrixStarAlgebra, CliError> {
    let n = sys.algebra().ambient_dim();
    match spec {
        AlgebraSpec::Center => Ok(sys.algebra().center(tol)),
        AlgebraSpec::Full => Ok(sys.algebra().clone()),
        other => algebra_from(other, n, path, tol),
    }
}

fn unitary(m: &Matrix, n: usize, path: &str, tol: &Tolerances) -> Result<CMatrix, CliError> {
    let u = to_cmatrix(m, path)?;
    if u.nrows() != n {
        return Err(CliError::validation(path, format!("expected a {n}x{n} matrix")));
    }
    let r = unitarity_residual(&u);
    if !(r < tol.eps_assert) {
        return Err(CliError::validation(path, format!("matrix is not unitary (residual {r:e})")));
    }
    Ok(u)
}

fn density(m: Option<&Matrix>, n: usize, path: &str) -> Result<TraceFunctional, CliError> {
    match m {
        None => Ok(TraceFunctional::normalized_trace(n)),
        Some(m) => {
            let d = to_cmatrix(m, path)?;
            if d.nrows() != n {
                return Err(CliError::validation(path, format!("expected a {n}x{n} matrix")));
            }
            Ok(TraceFunctional::new(d, true))
        }
    }
}

fn group_from(spec: &GroupSpec, path: &str) -> Result<FiniteGroup, CliError> {
    match spec {
        GroupSpec::Cyclic(0) => Err(CliError::validation(path, "cyclic group order must be positive")),
        GroupSpec::Cyclic(n) => Ok(FiniteGroup::cyclic(*n)),
        GroupSpec::Table(t) => FiniteGroup::new(t.clone()).map_err(|e| core_err(path, e)),
    }
}

/// Builds the parent system of one `system` node (used for the tensor factors).
fn build_parent(spec: &SystemSpec, path: &str, tol: &Tolerances) -> Result<WStarSystem, CliError> {
    match spec {
        SystemSpec::Explicit {
            dim,
            algebra,
            density: dens,
            dynamics,
            ..
        } => {
            let n = *dim;
            if n == 0 {
                return Err(CliError::validation(format!("{path}.dim"), "dimension must be positive"));
            }
            let alg = algebra_from(algebra, n, &format!("{path}.algebra"), tol)?;
            let trace = density(dens.as_ref(), n, &format!("{path}.density"))?;
            match dynamics {
                DynamicsSpec::Identity => {
                    let d = alg.dim();
                    WStarSystem::new(alg, trace, StarAutomorphism::identity(d), tol)
                        .map_err(|e| core_err(path, e))
                }
                DynamicsSpec::Unitary { matrix } => {
                    let u = unitary(matrix, n, &format!("{path}.dynamics.matrix"), tol)?;
                    WStarSystem::with_unitary(alg, trace, &u, tol).map_err(|e| core_err(&format!("{path}.dynamics"), e))
                }
                DynamicsSpec::Coordinates { matrix } => {
                    let p = format!("{path}.dynamics.matrix");
                    let m = to_cmatrix(matrix, &p)?;
                    if m.nrows() != alg.dim() {
                        return Err(CliError::validation(p, format!("expected a {0}x{0} matrix", alg.dim())));
                    }
                    WStarSystem::new(alg, trace, StarAutomorphism::from_coordinates(m), tol)
                        .map_err(|e| core_err(&format!("{path}.dynamics"), e))
                }
            }
        }
        SystemSpec::Classical { weights, permutation, .. } => {
            build_classical_system(weights, permutation, tol).map_err(|e| core_err(path, e))
        }
        SystemSpec::GroupVn { group, automorphism, .. } => {
            let g = group_from(group, &format!("{path}.group"))?;
            build_group_vn_system(&g, automorphism, tol).map_err(|e| core_err(&format!("{path}.automorphism"), e))
        }
        _ => Err(CliError::validation(
            path,
            "tensor factors must be explicit, classical or group_vn systems",
        )),
    }
}

fn summand(spec: &SummandSpec, path: &str, tol: &Tolerances) -> Result<Summand, CliError> {
    let algebra = algebra_from(&spec.algebra, spec.dim, &format!("{path}.algebra"), tol)?;
    let density = match &spec.density {
        Some(m) => {
            let d = to_cmatrix(m, &format!("{path}.density"))?;
            if d.nrows() != spec.dim {
                return Err(CliError::validation(format!("{path}.density"), "wrong size"));
            }
            d
        }
        None => CMatrix::identity(spec.dim, spec.dim).unscale(spec.dim as f64),
    };
    Ok(Summand { algebra, density })
}

fn opt_matrix(m: &Option<Matrix>, path: &str) -> Result<Option<CMatrix>, CliError> {
    m.as_ref().map(|m| to_cmatrix(m, path)).transpose()
}

/// Pimsner–Popa basis over `C·1`: an orthonormal basis of H pulled back to A.
fn scalar_right_basis(sys: &WStarSystem, tol: &Tolerances) -> Result<Vec<CMatrix>, CliError> {
    let gns = vnspec::gns::GnsSpace::build(sys, tol).map_err(|e| core_err("system", e))?;
    Ok((0..gns.dim())
        .map(|i| {
            let mut h = vnspec::linalg::CVector::zeros(gns.dim());
            h[i] = vnspec::linalg::ONE;
            gns.element_of(&h)
        })
        .collect())
}

fn simple(sys: WStarSystem, sub: &AlgebraSpec, tol: &Tolerances) -> Result<BuiltParts, CliError> {
    let sub_alg = subalgebra_from(sub, &sys, "system.subalgebra", tol)?;
    let right_basis = if sub_alg.dim() == 1 {
        Some(scalar_right_basis(&sys, tol)?)
    } else if sub_alg.dim() == sys.dim() {
        Some(vec![sys.algebra().identity()])
    } else {
        None
    };
    let subsystem = Subsystem::new(sys, sub_alg, tol).map_err(|e| core_err("system.subalgebra", e))?;
    Ok(BuiltParts {
        subsystem,
        hints: Vec::new(),
        right_basis,
        finite_extension: None,
        tensor_dims: None,
    })
}

struct BuiltParts {
    subsystem: Subsystem,
    hints: Vec<(String, CMatrix)>,
    right_basis: Option<Vec<CMatrix>>,
    finite_extension: Option<FiniteExtensionChecks>,
    tensor_dims: Option<(usize, usize)>,
}

pub fn build(desc: &SystemDescription, base: Tolerances) -> Result<BuiltSystem, CliError> {
    let tol = desc.tolerances.apply(base);
    if !tol.is_valid() {
        return Err(CliError::validation("tolerances", "tolerances must be positive"));
    }
    let parts = match &desc.system {
        spec @ SystemSpec::Explicit { subalgebra, .. }
        | spec @ SystemSpec::Classical { subalgebra, .. }
        | spec @ SystemSpec::GroupVn { subalgebra, .. } => simple(build_parent(spec, "system", &tol)?, subalgebra, &tol)?,
        SystemSpec::Tensor { b, c } => {
            let bs = build_parent(b, "system.b", &tol)?;
            let cs = build_parent(c, "system.c", &tol)?;
            let ts = build_tensor_system(&bs, &cs, &tol).map_err(|e| core_err("system", e))?;
            let h_sigma = vnspec::gns::GnsSpace::build(&cs, &tol).map_err(|e| core_err("system.c", e))?.dim();
            BuiltParts {
                tensor_dims: Some((ts.dim_b, h_sigma)),
                right_basis: Some(ts.right_basis),
                subsystem: ts.subsystem,
                hints: Vec::new(),
                finite_extension: None,
            }
        }
        SystemSpec::SkewProduct {
            weights,
            s,
            group,
            t,
            k,
            orbit_hints,
        } => {
            let spec = SkewProductSpec {
                weights: weights.clone(),
                s: s.clone(),
                group: group_from(group, "system.group")?,
                t: t.clone(),
                k: k.clone(),
            };
            let sp = build_skew_product(&spec, &tol).map_err(|e| core_err("system", e))?;
            let hints = if *orbit_hints {
                sp.orbit_modules
                    .iter()
                    .map(|m| (format!("orbit {:?}", m.orbit), m.projection.clone()))
                    .collect()
            } else {
                Vec::new()
            };
            BuiltParts {
                subsystem: sp.subsystem,
                hints,
                right_basis: None,
                finite_extension: None,
                tensor_dims: None,
            }
        }
        SystemSpec::FiniteExtension { b1, b2, s, v1, v2, v3, v4 } => {
            let spec = FiniteExtensionSpec {
                b1: summand(b1, "system.b1", &tol)?,
                b2: b2.as_ref().map(|b| summand(b, "system.b2", &tol)).transpose()?,
                s: *s,
                v1: to_cmatrix(v1, "system.v1")?,
                v2: opt_matrix(v2, "system.v2")?,
                v3: opt_matrix(v3, "system.v3")?,
                v4: to_cmatrix(v4, "system.v4")?,
            };
            let fe = build_finite_extension(&spec, &tol).map_err(|e| match e {
                vnspec::Error::NotUnitary(what) => {
                    let field = what.split_whitespace().next().unwrap_or("").to_string();
                    CliError::validation(format!("system.{}", field.to_lowercase()), format!("{what} is not unitary"))
                }
                other => core_err("system", other),
            })?;
            BuiltParts {
                subsystem: fe.subsystem,
                hints: Vec::new(),
                right_basis: None,
                finite_extension: Some(fe.checks),
                tensor_dims: None,
            }
        }
    };
    let n = parts.subsystem.parent().algebra().ambient_dim();
    let elements = desc
        .elements
        .iter()
        .map(|(name, m)| {
            let path = format!("elements.{name}");
            let x = to_cmatrix(m, &path)?;
            if x.nrows() != n {
                return Err(CliError::validation(path, format!("expected a {n}x{n} matrix")));
            }
            if !parts.subsystem.parent().algebra().contains(&x, &tol) {
                return Err(CliError::validation(path, "element is not in the algebra"));
            }
            Ok((name.clone(), x))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BuiltSystem {
        subsystem: parts.subsystem,
        hints: parts.hints,
        right_basis: parts.right_basis,
        finite_extension: parts.finite_extension,
        tensor_dims: parts.tensor_dims,
        elements,
        tolerances: tol,
    })
}

impl SystemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemSpec::Explicit { .. } => "explicit",
            SystemSpec::Classical { .. } => "classical",
            SystemSpec::GroupVn { .. } => "group_vn",
            SystemSpec::Tensor { .. } => "tensor",
            SystemSpec::SkewProduct { .. } => "skew_product",
            SystemSpec::FiniteExtension { .. } => "finite_extension",
        }
    }
}
