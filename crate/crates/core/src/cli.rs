//! JSON problem descriptors and the `validate`, `analyze` and `factor`
//! commands behind the `subfock` binary.
//!
//! Complex numbers are written as `[re, im]` pairs. Operators are row-major
//! nested arrays, and subspaces are lists of spanning vectors.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::curvature::{curvature, ConvergencePolicy, CurvatureMethod, CurvatureReport};
use crate::error::Error;
use crate::invariant::{
    beurling, factorization, is_invariant, wandering_from_factor, FactorizationResult, InvarianceReport,
    WanderingFromFactor,
};
use crate::linalg::{cplx, CMatrix, Subspace};
use crate::representation::{
    defect, poisson_kernel, purity, validate_rep, CovariantRep, PurityReport, RepValidation, PURITY_K_MAX,
};
use crate::subproduct::{
    degree2_system, full_system, symmetric_system, validate_system, FockBasis, SubproductSystem, SystemValidation,
};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_TOL: f64 = 1e-9;

/// A complex number as `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDescriptor {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub system: SystemDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<RepresentationDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<SubspaceDescriptor>,
    #[serde(default)]
    pub options: OptionsDescriptor,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKindName {
    Full,
    Symmetric,
    Degree2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDescriptor {
    pub kind: SystemKindName,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Vectors of `E ⊗ E` spanning the relations; `X(2)` is their
    /// orthogonal complement. Only for `degree2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<Vec<Pair>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationDescriptor {
    pub dim: usize,
    /// `operators[i][row][col]`.
    pub operators: Vec<Vec<Vec<Pair>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceDescriptor {
    /// Spanning vectors; they need not be orthonormal.
    pub basis: Vec<Vec<Pair>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Validate,
    Analyze,
    Factor,
}

/// Command-line settings that override or extend the descriptor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Curvature methods to run; all four when empty.
    pub methods: Vec<CurvatureMethod>,
    /// Use the induced shift `S ⊗ I_r` instead of the given representation.
    pub shift: bool,
    pub options: OptionsDescriptor,
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::AmbientMismatch { .. }
        | Error::ShapeMismatch(_)
        | Error::DegreeOutOfRange { .. }
        | Error::DegenerateInput(_) => exit::INPUT,
        Error::NotInvariant { .. } | Error::NotPure { .. } | Error::TrivialSubspace | Error::NotWandering { .. } => {
            exit::VALIDATION
        }
        Error::NotPsd { .. }
        | Error::NotHermitian { .. }
        | Error::NoConvergence { .. }
        | Error::NonpositiveDenominator { .. }
        | Error::NotProductSystem
        | Error::UnsupportedCase(_) => exit::NUMERICAL,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::NotPsd { .. } => "NotPSD",
        Error::NotHermitian { .. } => "NotHermitian",
        Error::AmbientMismatch { .. } => "AmbientMismatch",
        Error::DegreeOutOfRange { .. } => "DegreeOutOfRange",
        Error::ShapeMismatch(_) => "ShapeMismatch",
        Error::NotInvariant { .. } => "NotInvariant",
        Error::NotPure { .. } => "NotPure",
        Error::TrivialSubspace => "TrivialSubspace",
        Error::NotWandering { .. } => "NotWandering",
        Error::NoConvergence { .. } => "NoConvergence",
        Error::NonpositiveDenominator { .. } => "NonpositiveDenominator",
        Error::NotProductSystem => "NotProductSystem",
        Error::UnsupportedCase(_) => "UnsupportedCase",
        Error::DegenerateInput(_) => "DegenerateInput",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(err: &Error) -> Self {
        Self { kind: error_kind(err), message: err.to_string() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub kind: SystemKindName,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub fock_dim: usize,
    #[serde(flatten)]
    pub validation: SystemValidation,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoissonSummary {
    pub defect_rank: usize,
    pub norm: f64,
    /// `‖K*K − (I − Θ^{N+1}(I))‖`.
    pub identity_residual: f64,
    /// Intertwining residual on degrees `≤ N − 1`.
    pub intertwining_residual: f64,
    pub intertwining_top_degree: f64,
}

/// One curvature method's outcome: its report, or why it did not apply.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum CurvatureEntry {
    Report(CurvatureReport),
    Failed { method: CurvatureMethod, error: ErrorInfo },
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationSummary {
    /// `beurling` for the induced shift, `factorization` otherwise.
    pub path: &'static str,
    pub multiplicity: Option<usize>,
    #[serde(flatten)]
    pub result: FactorizationResult,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<RepValidation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purity: Option<PurityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defect_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson: Option<PoissonSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub curvature: Vec<CurvatureEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariance: Option<InvarianceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factorization: Option<FactorizationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wandering: Option<WanderingFromFactor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    /// Wall-clock milliseconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// A finished command: the report for standard output and the exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
}

/// Reads a descriptor, rejecting unknown schema versions.
pub fn parse_descriptor(text: &str) -> Result<ProblemDescriptor, String> {
    let desc: ProblemDescriptor = serde_json::from_str(text).map_err(|e| format!("invalid descriptor: {e}"))?;
    if desc.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            desc.schema_version
        ));
    }
    Ok(desc)
}

fn complex_vector(entries: &[Pair], len: usize, what: &str) -> crate::Result<Vec<num_complex::Complex64>> {
    if entries.len() != len {
        return Err(Error::ShapeMismatch(format!("{what} has {} entries, expected {len}", entries.len())));
    }
    Ok(entries.iter().map(|[re, im]| cplx(*re, *im)).collect())
}

fn columns(vectors: &[Vec<Pair>], len: usize, what: &str) -> crate::Result<CMatrix> {
    let mut m = CMatrix::zeros(len, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        let v = complex_vector(v, len, what)?;
        for (r, z) in v.into_iter().enumerate() {
            m[(r, c)] = z;
        }
    }
    Ok(m)
}

/// Builds the subproduct system named by a descriptor.
pub fn build_system(desc: &SystemDescriptor) -> crate::Result<SubproductSystem> {
    if desc.relations.is_some() && desc.kind != SystemKindName::Degree2 {
        return Err(Error::DegenerateInput("relations are only accepted for degree2 systems".into()));
    }
    match desc.kind {
        SystemKindName::Full => full_system(desc.d, desc.n),
        SystemKindName::Symmetric => symmetric_system(desc.d, desc.n),
        SystemKindName::Degree2 => {
            let dd = desc.d * desc.d;
            let x2 = match &desc.relations {
                Some(rel) if !rel.is_empty() => {
                    Subspace::span(&columns(rel, dd, "relation vector")?).orthogonal_complement()
                }
                _ => Subspace::full(dd),
            };
            degree2_system(desc.d, desc.n, &x2)
        }
    }
}

/// Builds the representation of a descriptor on `sys`.
pub fn build_representation(sys: &Arc<SubproductSystem>, desc: &RepresentationDescriptor) -> crate::Result<CovariantRep> {
    let h = desc.dim;
    let mut coeffs = Vec::with_capacity(desc.operators.len());
    for (i, op) in desc.operators.iter().enumerate() {
        if op.len() != h {
            return Err(Error::ShapeMismatch(format!("operator {} has {} rows, expected {h}", i + 1, op.len())));
        }
        let mut m = CMatrix::zeros(h, h);
        for (r, row) in op.iter().enumerate() {
            for (c, z) in complex_vector(row, h, "operator row")?.into_iter().enumerate() {
                m[(r, c)] = z;
            }
        }
        coeffs.push(m);
    }
    CovariantRep::new(sys.clone(), coeffs)
}

struct Resolved {
    sys: Arc<SubproductSystem>,
    rep: CovariantRep,
    coeffs_valid: Option<RepValidation>,
    shift_multiplicity: Option<usize>,
    tol: f64,
    k_max: Option<usize>,
    policy: ConvergencePolicy,
}

fn resolve(desc: &ProblemDescriptor, over: &Overrides) -> crate::Result<Resolved> {
    let sys = Arc::new(build_system(&desc.system)?);
    let fock = FockBasis::new(sys.clone());
    let pick = |o: Option<f64>, d: Option<f64>| o.or(d);
    let tol = pick(over.options.tol, desc.options.tol).unwrap_or(DEFAULT_TOL);
    let k_max = over.options.k_max.or(desc.options.k_max);
    let defaults = ConvergencePolicy::default();
    let policy = ConvergencePolicy {
        window: over.options.window.or(desc.options.window).unwrap_or(defaults.window),
        eps: pick(over.options.eps, desc.options.eps).unwrap_or(defaults.eps),
    };
    let (rep, coeffs_valid, shift_multiplicity) = match (&desc.representation, over.shift) {
        (Some(r), false) => {
            let rep = build_representation(&sys, r)?;
            let v = validate_rep(&sys, rep.coefficients(), tol)?;
            (rep, Some(v), None)
        }
        (_, shift) => {
            // Multiplicity from the subspace length in shift mode, else 1.
            let mut r = 1;
            if shift {
                if let Some(s) = desc.subspace.as_ref().and_then(|s| s.basis.first()) {
                    if s.len() % fock.total_dim() != 0 || s.is_empty() {
                        return Err(Error::ShapeMismatch(format!(
                            "subspace vectors of length {} do not fit F_X ⊗ C^r with dim F_X = {}",
                            s.len(),
                            fock.total_dim()
                        )));
                    }
                    r = s.len() / fock.total_dim();
                }
            }
            let rep = CovariantRep::induced_shift(&fock, r)?;
            let v = validate_rep(&sys, rep.coefficients(), tol)?;
            (rep, Some(v), Some(r))
        }
    };
    Ok(Resolved { sys, rep, coeffs_valid, shift_multiplicity, tol, k_max, policy })
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn fail(mut report: Report, err: &Error) -> Outcome {
    report.error = Some(err.into());
    Outcome { report, exit_code: exit_code(err) }
}

/// Runs one command on a parsed descriptor.
pub fn run(command: Command, desc: &ProblemDescriptor, over: &Overrides) -> Outcome {
    let mut report = Report { schema_version: SCHEMA_VERSION, command: Some(command), ..Report::default() };
    let start = Instant::now();
    let res = match resolve(desc, over) {
        Ok(r) => r,
        Err(e) => return fail(report, &e),
    };
    let sys_check = validate_system(&res.sys, res.tol);
    let fock_dim = FockBasis::new(res.sys.clone()).total_dim();
    let structurally_valid = sys_check.passes;
    report.system = Some(SystemSummary {
        kind: desc.system.kind,
        d: desc.system.d,
        n: desc.system.n,
        fock_dim,
        validation: sys_check,
    });
    report.validation = res.coeffs_valid.clone();
    report.timings.insert("validate".into(), ms(start));
    let valid = structurally_valid && res.coeffs_valid.as_ref().is_some_and(|v| v.valid);
    if !valid {
        return Outcome { report, exit_code: exit::VALIDATION };
    }
    let result = match command {
        Command::Validate => Ok(exit::OK),
        Command::Analyze => analyze(&res, over, &mut report),
        Command::Factor => factor(&res, desc, &mut report),
    };
    report.timings.insert("total".into(), ms(start));
    match result {
        Ok(code) => Outcome { report, exit_code: code },
        Err(e) => fail(report, &e),
    }
}

fn analyze(res: &Resolved, over: &Overrides, report: &mut Report) -> crate::Result<i32> {
    let rep = &res.rep;
    let t = Instant::now();
    let p = purity(rep, res.tol, PURITY_K_MAX);
    report.purity = Some(p);
    report.timings.insert("purity".into(), ms(t));

    let t = Instant::now();
    report.defect_rank = Some(defect(rep)?.space.rank());
    let kernel = poisson_kernel(rep)?;
    let tw = kernel.intertwining();
    report.poisson = Some(PoissonSummary {
        defect_rank: kernel.defect_rank(),
        norm: kernel.norm(),
        identity_residual: kernel.identity_residual(),
        intertwining_residual: tw.restricted,
        intertwining_top_degree: tw.top_degree,
    });
    report.timings.insert("poisson".into(), ms(t));

    let methods: Vec<CurvatureMethod> =
        if over.methods.is_empty() { CurvatureMethod::ALL.to_vec() } else { over.methods.clone() };
    let mut code = exit::OK;
    for method in methods {
        let t = Instant::now();
        let entry = match curvature(rep, method, res.k_max, res.policy) {
            Ok(r) => CurvatureEntry::Report(r),
            Err(e) => {
                // Methods that do not apply are reported, not fatal.
                let expected = matches!(e, Error::NotPure { .. } | Error::NotProductSystem);
                if !expected {
                    code = code.max(exit_code(&e));
                }
                CurvatureEntry::Failed { method, error: (&e).into() }
            }
        };
        report.timings.insert(format!("curvature.{}", method_name(method)), ms(t));
        report.curvature.push(entry);
    }
    Ok(code)
}

pub fn method_name(method: CurvatureMethod) -> &'static str {
    match method {
        CurvatureMethod::Direct => "direct",
        CurvatureMethod::ClosedForm => "closed_form",
        CurvatureMethod::Poisson => "poisson",
        CurvatureMethod::Complement => "complement",
    }
}

/// Parses a method name as accepted by `--method`.
pub fn parse_method(name: &str) -> Option<CurvatureMethod> {
    match name.trim() {
        "direct" => Some(CurvatureMethod::Direct),
        "closed" | "closed_form" => Some(CurvatureMethod::ClosedForm),
        "poisson" => Some(CurvatureMethod::Poisson),
        "complement" => Some(CurvatureMethod::Complement),
        _ => None,
    }
}

fn factor(res: &Resolved, desc: &ProblemDescriptor, report: &mut Report) -> crate::Result<i32> {
    let Some(sub) = &desc.subspace else {
        return Err(Error::DegenerateInput("factor needs a subspace".into()));
    };
    let rep = &res.rep;
    let s = Subspace::span(&columns(&sub.basis, rep.h_dim(), "subspace vector")?);
    let inv = is_invariant(rep, &s, res.tol)?;
    report.invariance = Some(inv);
    if !inv.invariant {
        return Err(Error::NotInvariant { residual: inv.residual });
    }
    let t = Instant::now();
    let (fact, path) = match res.shift_multiplicity {
        Some(r) => (beurling(&res.sys, r, &s)?, "beurling"),
        None => (factorization(rep, &s)?, "factorization"),
    };
    report.timings.insert("factorization".into(), ms(t));
    let t = Instant::now();
    let wandering = wandering_from_factor(rep, &fact)?;
    report.timings.insert("wandering".into(), ms(t));
    report.factorization = Some(FactorizationSummary { path, multiplicity: res.shift_multiplicity, result: fact });
    report.wandering = Some(wandering);
    Ok(exit::OK)
}
