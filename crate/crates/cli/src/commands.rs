use std::path::{Path, PathBuf};

use bochner_core::curvature::RiemannTensor;
use bochner_core::hodge::SimplicialComplex;
use bochner_core::multiindex::{overlap_matrix, overlap_row_sum, perron_eigenvalue};
use bochner_core::stochastic::{self as st, RunConfig};
use bochner_core::{pinching, weitzenbock};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{emit, read, to_json};
use crate::CliError;

/// Default number of paths for the W flow, which integrates a matrix ODE per path.
pub const WFLOW_DEFAULT_PATHS: usize = 100;
const PERRON_TOL: f64 = 1e-8;

fn load_tensor(path: &Path) -> Result<RiemannTensor, CliError> {
    Ok(RiemannTensor::from_json(&read(path)?)?)
}

#[derive(Serialize)]
struct Envelope<P: Serialize, R: Serialize> {
    command: &'static str,
    params: P,
    result: R,
}

fn finish<P: Serialize, R: Serialize>(
    command: &'static str,
    params: P,
    result: R,
    output: Option<&Path>,
) -> Result<(), CliError> {
    emit(&to_json(&Envelope { command, params, result }), output)
}

pub fn rp(input: &Path, p: usize, output: Option<&Path>) -> Result<(), CliError> {
    let r = load_tensor(input)?;
    let n = r.dim();
    if p > n {
        return Err(CliError::Input(format!("p = {p} exceeds the tensor dimension {n}")));
    }
    let op = weitzenbock::assemble(&r, p)?;
    let spectrum = op.spectrum()?;
    let structure = if p >= 2 && p + 2 <= n {
        Some(weitzenbock::check_lemma31(&r, p)?)
    } else {
        None
    };
    let passes = structure.as_ref().is_none_or(|s| s.passes);
    let result = json!({
        "operator": op.dump(),
        "min_eigenvalue": spectrum.first(),
        "max_eigenvalue": spectrum.last(),
        "spectrum": spectrum,
        "structure": structure,
    });
    finish("rp", json!({ "input": input, "p": p }), result, output)?;
    if !passes {
        return Err(CliError::Check("overlap structure of the operator is violated".into()));
    }
    Ok(())
}

pub fn pinch(input: &Path, p: usize, restarts: usize, seed: u64, output: Option<&Path>) -> Result<(), CliError> {
    let r = load_tensor(input)?;
    let report = pinching::is_pinched(&r, p, restarts, seed)?;
    let min_eigenvalue = pinching::operator_floor(&r, p)?;
    let bound = pinching::report_lower_bound(&report);
    let consistent = !report.pinched || (min_eigenvalue > 0.0 && bound.is_none_or(|b| min_eigenvalue >= b - 1e-9));
    let result = json!({
        "report": report,
        "min_eigenvalue": min_eigenvalue,
        "corollary_bound": bound,
        "A_midpoint": report.a_midpoint(),
        "consistent": consistent,
    });
    let params = json!({ "input": input, "p": p, "restarts": restarts, "seed": seed });
    finish("pinch", params, result, output)?;
    if !consistent {
        return Err(CliError::Check("pinched tensor with ℛ^p below the implied bound".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct NamedCheck {
    name: &'static str,
    pass: bool,
}

pub fn example(a: f64, restarts: usize, seed: u64, output: Option<&Path>) -> Result<(), CliError> {
    if a <= 0.0 || !a.is_finite() {
        return Err(CliError::Input(format!("--a must be positive, got {a}")));
    }
    let report = pinching::product_example(a, restarts, seed)?;
    let tol = 1e-12;
    let is_expected = |v: f64| (v - 3.0).abs() <= tol || (v - (4.0 - a)).abs() <= tol;
    let mut checks = vec![
        NamedCheck {
            name: "diagonal entries are 4-a or 3",
            pass: report.diagonal.iter().all(|d| is_expected(d.value)),
        },
        NamedCheck {
            name: "operator is diagonal",
            pass: report.max_off_diagonal <= tol,
        },
        NamedCheck {
            name: "min eigenvalue is min(3, 4-a)",
            pass: (report.min_eigenvalue - 3f64.min(4.0 - a)).abs() <= tol,
        },
        NamedCheck {
            name: "positive exactly when a < 4",
            pass: report.positive == (a < report.positivity_threshold),
        },
        NamedCheck {
            name: "coordinate 3-plane sums are 4-a or 3",
            pass: report.sum3_samples.iter().filter(|s| !s.block.is_empty()).all(|s| is_expected(s.sum)),
        },
        NamedCheck {
            name: "not pinched at p = 2",
            pass: !report.pinch_p2.pinched,
        },
    ];
    if a == 1.0 {
        checks.push(NamedCheck {
            name: "all 3-plane sums equal 3",
            pass: report.sum3_samples.iter().all(|s| (s.sum - 3.0).abs() <= 1e-9),
        });
        checks.push(NamedCheck {
            name: "pinched at p = 3",
            pass: report.pinch_p3.pinched,
        });
    }
    let all_pass = checks.iter().all(|c| c.pass);
    let result = json!({ "report": report, "checks": checks, "all_pass": all_pass });
    finish("example", json!({ "a": a, "restarts": restarts, "seed": seed }), result, output)?;
    if !all_pass {
        return Err(CliError::Check("worked example is internally inconsistent".into()));
    }
    Ok(())
}

pub struct StochasticRequest {
    pub input: PathBuf,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub p: Option<usize>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// Configuration with flag overrides applied and defaults filled in.
struct Resolved {
    config: RunConfig,
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: u64,
}

impl Resolved {
    fn params(&self) -> Value {
        json!({
            "model": self.config.model,
            "f": self.config.f,
            "T": self.horizon,
            "dt": self.dt,
            "N": self.paths,
            "seed": self.seed,
            "starts": self.config.start_points(),
            "p": self.config.p,
            "perturbation": self.config.perturbation,
        })
    }

    fn field(&self) -> Result<st::Field, CliError> {
        let spec = self
            .config
            .f
            .as_ref()
            .ok_or_else(|| CliError::Input("configuration has no potential \"f\"".into()))?;
        Ok(spec.resolve(&self.config.model)?)
    }
}

fn resolve(req: &StochasticRequest, default_paths: usize) -> Result<Resolved, CliError> {
    let mut config = RunConfig::from_json(&read(&req.input)?)?;
    config.model.validate()?;
    if req.p.is_some() {
        config.p = req.p;
    }
    let seed = req
        .seed
        .or(config.seed)
        .ok_or_else(|| CliError::Input("a seed is required (--seed or \"seed\" in the configuration)".into()))?;
    config.seed = Some(seed);
    Ok(Resolved {
        horizon: req.horizon.or(config.horizon).unwrap_or(st::DEFAULT_HORIZON),
        dt: req.dt.or(config.dt).unwrap_or(st::DEFAULT_DT),
        paths: req.paths.or(config.n_paths).unwrap_or(default_paths),
        seed,
        config,
    })
}

fn write_csv(path: Option<&Path>, curve: &[st::CurvePoint]) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::write(p, st::curve_csv(curve))
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

pub fn ssp(req: &StochasticRequest) -> Result<(), CliError> {
    let run = resolve(req, st::DEFAULT_PATHS)?;
    let f = run.field()?;
    let starts = run.config.start_points();
    let report = st::ssp_rate_multi(&run.config.model, &f, &starts, run.horizon, run.dt, run.paths, run.seed)?;
    let worst = &report.per_start[report.worst_start];
    write_csv(req.csv.as_deref(), &worst.curve)?;
    let result = json!({
        "rate": report.rate,
        "stderr": report.stderr,
        "ssp_verdict": report.ssp_verdict,
        "lambda0_lower_bound": st::lambda0_lower_bound(worst),
        "worst_start": report.worst_start,
        "per_start": report.per_start,
    });
    finish("ssp", run.params(), result, req.output.as_deref())
}

pub fn fk(req: &StochasticRequest, integral: bool, tol: Option<f64>) -> Result<(), CliError> {
    let run = resolve(req, st::DEFAULT_PATHS)?;
    let f = run.field()?;
    let x0 = run.config.start_points().swap_remove(0);
    let model = &run.config.model;
    let est = st::feynman_kac(model, &f, &x0, run.horizon, run.dt, run.paths, run.seed)?;
    write_csv(req.csv.as_deref(), &est.curve)?;
    let tol = tol.or(run.config.tol).unwrap_or(st::DEFAULT_TAIL_TOL);
    let r_underline = if integral {
        Some(st::r_underline_q(model, &f, &x0, run.horizon, run.dt, run.paths, run.seed, tol)?)
    } else {
        None
    };
    let mut params = run.params();
    params["integral"] = json!(integral);
    params["tol"] = json!(tol);
    let result = json!({ "estimate": est, "r_underline": r_underline });
    finish("fk", params, result, req.output.as_deref())
}

pub fn wflow(req: &StochasticRequest) -> Result<(), CliError> {
    let run = resolve(req, WFLOW_DEFAULT_PATHS)?;
    let p = run
        .config
        .p
        .ok_or_else(|| CliError::Input("the W flow needs a degree (--p or \"p\" in the configuration)".into()))?;
    let field = run.config.tensor_field()?;
    let x0 = run.config.start_points().swap_remove(0);
    let summary = st::w_flow_paths(&run.config.model, &field, p, &x0, run.horizon, run.dt, run.paths, run.seed)?;
    let dominated = summary.dominated;
    finish("wflow", run.params(), &summary, req.output.as_deref())?;
    if !dominated {
        return Err(CliError::Check(format!(
            "|W_t v| exceeds the scalar bound by a factor {}",
            summary.max_ratio
        )));
    }
    Ok(())
}

pub fn hodge(
    input: Option<&Path>,
    vertices: Option<usize>,
    prob: f64,
    seed: Option<u64>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let (complex, params) = match (input, vertices) {
        (Some(path), None) => (SimplicialComplex::from_json(&read(path)?)?, json!({ "input": path })),
        (None, Some(v)) => {
            if !(0.0..=1.0).contains(&prob) {
                return Err(CliError::Input(format!("--prob must lie in [0, 1], got {prob}")));
            }
            let seed = seed.ok_or_else(|| CliError::Input("--vertices needs --seed".into()))?;
            (
                SimplicialComplex::random_clique_complex(v, prob, seed)?,
                json!({ "vertices": v, "prob": prob, "seed": seed }),
            )
        }
        _ => return Err(CliError::Input("give either --input or --vertices".into())),
    };
    let report = complex.check_interlacing()?;
    let ok = report.all_ok;
    let result = json!({ "complex": complex.to_file(), "report": report });
    finish("hodge", params, result, output)?;
    if !ok {
        return Err(CliError::Check("spectral gaps fail to interlace".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct PerronCase {
    n: usize,
    p: usize,
    k: usize,
    perron: f64,
    row_sum: usize,
    defect: f64,
}

pub fn lemma32(max_n: usize, output: Option<&Path>) -> Result<(), CliError> {
    if max_n == 0 || max_n > 12 {
        return Err(CliError::Input(format!("--n must lie in 1..=12, got {max_n}")));
    }
    let mut cases = Vec::new();
    for n in 1..=max_n {
        for p in 0..=n {
            for k in 0..=p {
                let perron = perron_eigenvalue(&overlap_matrix(n, p, k)?)?;
                let row_sum = overlap_row_sum(n, p, k);
                cases.push(PerronCase {
                    n,
                    p,
                    k,
                    perron,
                    row_sum,
                    defect: (perron - row_sum as f64).abs(),
                });
            }
        }
    }
    let max_defect = cases.iter().map(|c| c.defect).fold(0.0, f64::max);
    let passes = max_defect <= PERRON_TOL;
    let result = json!({ "cases": cases, "max_defect": max_defect, "tolerance": PERRON_TOL, "passes": passes });
    finish("lemma32", json!({ "n": max_n }), result, output)?;
    if !passes {
        return Err(CliError::Check(format!("Perron eigenvalue off by {max_defect}")));
    }
    Ok(())
}
