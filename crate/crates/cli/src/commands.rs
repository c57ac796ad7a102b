use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use symdiag_core::classify::{class_report, md_search, Tolerances};
use symdiag_core::counterexamples::{
    verify_counterexample, verify_dim2_gmd_equals_md, CounterexampleConfig, CounterexampleReport,
    Dim2Config, Dim2Report, RhoSearchConfig,
};
use symdiag_core::jacobi::{
    convergence_diagnostics, jacobi_com, jacobi_multistart, maximize_trifactor, JacobiConfig,
    PairRule, TriFactorConfig,
};
use symdiag_core::tensor::generate::{
    from_weights_and_basis, lmd3, pd4_three_quarters, random_odeco, random_pd, random_symmetric,
    rng_from_seed, symmetrizer_123,
};
use symdiag_core::tensor::io::{parse_any, to_json, write_matrix, write_text_with_comments};
use symdiag_core::{OrthoMatrix, SymTensor3};

use crate::manifest::RunManifest;
use crate::{
    Failure, Format, GenerateKind, GlobalOpts, PairRuleArg, EXIT_INCONSISTENT, EXIT_NOT_CONVERGED,
    EXIT_OK, EXIT_OTHER, EXIT_PARSE,
};

type CmdResult = Result<u8, Failure>;

/// Starts used by the three-factor comparison when `--restarts` is lower.
const TRIFACTOR_MIN_STARTS: usize = 16;

fn jacobi_config(g: &GlobalOpts) -> JacobiConfig {
    JacobiConfig {
        max_sweeps: g.max_sweeps,
        stop_tol: g.tol,
        pair_rule: match g.pair_rule {
            PairRuleArg::Cyclic => PairRule::Cyclic,
            PairRuleArg::Greedy => PairRule::Greedy,
        },
        restrict_quarter_pi: g.restrict_quarter_pi,
        record_trace: true,
    }
}

fn read_tensor(path: &Path) -> Result<SymTensor3, Failure> {
    let src = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_OTHER, format!("{}: {e}", path.display())))?;
    // any rejection of the file contents counts as a parse error
    parse_any(&src).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tensor".into());
    match name.split_once('.') {
        Some((head, _)) if !head.is_empty() => head.to_string(),
        _ => name,
    }
}

fn out_path(g: &GlobalOpts, name: String) -> PathBuf {
    g.out_dir.join(name)
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, body).map_err(|e| Failure::new(EXIT_OTHER, format!("{}: {e}", path.display())))
}

fn json_with_manifest<T: Serialize>(manifest: &RunManifest, body: &T) -> Result<String, Failure> {
    let mut v = serde_json::to_value(body).map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert(
            "manifest".into(),
            serde_json::to_value(manifest).map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?,
        );
    }
    let mut s =
        serde_json::to_string_pretty(&v).map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct TriFactorCheck {
    starts: usize,
    f_value: f64,
    /// Three-factor value minus the symmetric value.
    gap: f64,
    threshold: f64,
    strictly_below: bool,
    note: Option<String>,
}

#[derive(Serialize)]
struct DiagonalizeSummary {
    status: String,
    converged: bool,
    n: usize,
    norm_sq: f64,
    start_index: usize,
    f_initial: f64,
    f_final: f64,
    rotations: usize,
    tol: f64,
    sweep_f: Vec<f64>,
    sweep_max_abs_d: Vec<f64>,
    final_max_abs_d: f64,
    final_min_omega: f64,
    diagonal: Vec<f64>,
    offdiag_norm_sq: f64,
    q_residual: f64,
    suspected_saddle: bool,
    lmd: String,
    trifactor: Option<TriFactorCheck>,
}

pub fn diagonalize(g: &GlobalOpts, input: &Path, trifactor: bool) -> CmdResult {
    let a = read_tensor(input)?;
    let cfg = jacobi_config(g);
    let (trace, start_index) = if g.restarts > 1 {
        let ms = jacobi_multistart(&a, &cfg, g.restarts, g.seed, g.threads)?;
        (ms.best, ms.best_index)
    } else {
        (jacobi_com(&a, &cfg)?, 0)
    };
    let diag = convergence_diagnostics(&trace);

    let st = stem(input);
    let paths = [
        out_path(g, format!("{st}.trace.csv")),
        out_path(g, format!("{st}.trace.json")),
        out_path(g, format!("{st}.W.txt")),
        out_path(g, format!("{st}.Q.txt")),
        out_path(g, format!("{st}.summary.json")),
    ];
    let mut manifest = RunManifest::new(
        "diagonalize",
        g,
        json!({ "trifactor": trifactor, "trifactor_min_starts": TRIFACTOR_MIN_STARTS }),
    );
    manifest.inputs.push(input.display().to_string());
    manifest.outputs = paths.iter().map(|p| p.display().to_string()).collect();

    let tri = if trifactor {
        let starts = g.restarts.max(TRIFACTOR_MIN_STARTS);
        let res = maximize_trifactor(
            &a,
            &TriFactorConfig {
                max_sweeps: g.max_sweeps.max(200),
                stop_tol: g.tol,
                symmetric: false,
                starts,
                seed: g.seed,
                threads: g.threads,
            },
        )?;
        let gap = res.f_value - trace.f_final;
        let threshold = 1e-6 * a.norm_sq().max(1.0);
        let strictly_below = gap > threshold;
        let note = strictly_below.then(|| {
            format!(
                "global max under symmetric action strictly below tri-factor value {}",
                fmt_short(res.f_value)
            )
        });
        Some(TriFactorCheck {
            starts,
            f_value: res.f_value,
            gap,
            threshold,
            strictly_below,
            note,
        })
    } else {
        None
    };

    let w = &trace.w;
    let summary = DiagonalizeSummary {
        status: if trace.converged() { "converged" } else { "max_sweeps" }.into(),
        converged: trace.converged(),
        n: a.n(),
        norm_sq: a.norm_sq(),
        start_index,
        f_initial: trace.f_initial,
        f_final: trace.f_final,
        rotations: trace.rotations,
        tol: trace.tol,
        sweep_f: trace.sweeps.iter().map(|s| s.f).collect(),
        sweep_max_abs_d: diag.per_sweep_max_abs_d.clone(),
        final_max_abs_d: diag.final_max_abs_d,
        final_min_omega: diag.final_min_omega,
        diagonal: w.diag(),
        offdiag_norm_sq: (w.norm_sq() - w.diag_norm_sq()).max(0.0),
        q_residual: trace.q.residual(),
        suspected_saddle: diag.suspected_saddle,
        lmd: diag.lmd.label().into(),
        trifactor: tri,
    };

    write_file(&paths[0], &manifest.prefix(&trace.to_csv()))?;
    let trace_json: serde_json::Value = serde_json::from_str(&trace.to_json()?)
        .map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    write_file(&paths[1], &json_with_manifest(&manifest, &trace_json)?)?;
    write_file(&paths[2], &write_text_with_comments(w, &manifest.comment_lines()))?;
    write_file(&paths[3], &manifest.prefix(&write_matrix(trace.q.matrix())))?;
    write_file(&paths[4], &json_with_manifest(&manifest, &summary)?)?;

    eprintln!("{}: n={} ‖A‖²={}", input.display(), a.n(), fmt_short(a.norm_sq()));
    for s in &trace.sweeps {
        eprintln!(
            "  sweep {:>3}  f={}  max|d|={:.3e}  rotations={} retried={} rejected={}",
            s.sweep,
            fmt_short(s.f),
            s.max_abs_d,
            s.rotations,
            s.retried,
            s.rejected
        );
    }
    eprintln!(
        "  {} after {} rotations: f={} (from {}), max|d|={:.3e}, min ω={:.3e}",
        summary.status,
        trace.rotations,
        fmt_short(trace.f_final),
        fmt_short(trace.f_initial),
        diag.final_max_abs_d,
        diag.final_min_omega
    );
    if diag.suspected_saddle {
        eprintln!("  warning: final point looks like a saddle ({})", diag.lmd.label());
    }
    if let Some(t) = &summary.trifactor {
        eprintln!(
            "  three-factor value {} (gap {:.3e})",
            fmt_short(t.f_value),
            t.gap
        );
        if let Some(note) = &t.note {
            eprintln!("  {note}");
        }
    }

    Ok(if trace.converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn fmt_short(v: f64) -> String {
    format!("{v:.10}")
        .trim_end_matches('0')
        .trim_end_matches('.')
        .to_string()
}

pub fn classify(g: &GlobalOpts, input: &Path, tols: Tolerances, search: bool) -> CmdResult {
    let a = read_tensor(input)?;
    let path = out_path(g, format!("{}.class.json", stem(input)));
    let mut manifest = RunManifest::new(
        "classify",
        g,
        json!({ "tolerances": tols, "md_search": search }),
    );
    manifest.inputs.push(input.display().to_string());
    manifest.outputs.push(path.display().to_string());

    let mut report = match class_report(&a, &tols) {
        Ok(r) => r,
        Err(e) => {
            let f = Failure::from(e);
            if f.code == EXIT_INCONSISTENT {
                let body = json!({ "error": f.msg, "consistent": false });
                write_file(&path, &json_with_manifest(&manifest, &body)?)?;
            }
            return Err(f);
        }
    };
    if search {
        report.md_search = Some(md_search(&a, &tols, g.restarts.max(1), g.seed, g.threads)?);
    }
    write_file(&path, &json_with_manifest(&manifest, &report)?)?;

    eprintln!("{}: n={} ‖A‖={}", input.display(), a.n(), fmt_short(report.norm));
    eprintln!("  diagonal          {}", report.diagonal.holds);
    eprintln!("  pseudo-diagonal   {}", report.pd.holds);
    eprintln!("  stationary        {}", report.sd.holds);
    eprintln!("  jacobi-diagonal   {}", report.jd.holds);
    eprintln!(
        "  local max (Q = I) {}  hessian eigenvalues in [{:.6e}, {:.6e}]",
        report.lmd.label(),
        report.hessian.min_eig,
        report.hessian.max_eig
    );
    if let Some(m) = &report.md_search {
        eprintln!(
            "  {} search over {} starts: best f={} vs f(I)={}{}",
            m.label,
            m.starts,
            fmt_short(m.best_f),
            fmt_short(m.f_identity),
            if m.found_better { " (better rotation found)" } else { "" }
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyOutput {
    #[serde(rename = "F_star")]
    f_star: f64,
    f_sup_found: f64,
    rho_sup_found: f64,
    bound: f64,
    cubic_roots: Vec<f64>,
    phi_values: Vec<f64>,
    counterexample: CounterexampleReport,
    dim2: Vec<Dim2Report>,
    pass: bool,
}

/// Ratios checked by the 2-dimensional certificate.
const DIM2_GAMMAS: [f64; 5] = [-1.0, -0.5, 0.0, 0.2, 1.0 / 3.0];

pub fn verify(g: &GlobalOpts, starts: usize, grid: usize, samples: usize) -> CmdResult {
    let path = out_path(g, "verify.json".into());
    let mut manifest = RunManifest::new(
        "verify",
        g,
        json!({ "starts": starts, "grid": grid, "samples": samples, "dim2_gammas": DIM2_GAMMAS }),
    );
    manifest.outputs.push(path.display().to_string());

    let cfg = CounterexampleConfig {
        starts,
        seed: g.seed,
        threads: g.threads,
        rho: RhoSearchConfig {
            starts,
            seed: g.seed,
            threads: g.threads,
            ..Default::default()
        },
        ..Default::default()
    };
    let ce = verify_counterexample(&cfg)?;
    let dcfg = Dim2Config {
        grid,
        samples,
        seed: g.seed,
        ..Default::default()
    };
    let mut dim2 = Vec::new();
    for (k, &gamma) in DIM2_GAMMAS.iter().enumerate() {
        // distinct diagonal pairs, one with a negative entry
        let (a, d) = [(1.0, 0.5), (2.0, -1.0), (1.0, 1.0), (0.7, 0.3), (1.5, -0.25)][k];
        dim2.push(verify_dim2_gmd_equals_md(a, d, gamma, &dcfg)?);
    }
    let pass = ce.pass && dim2.iter().all(|r| r.holds);
    let out = VerifyOutput {
        f_star: ce.f_star,
        f_sup_found: ce.f_sup_found,
        rho_sup_found: ce.rho_sup_found,
        bound: ce.bound,
        cubic_roots: ce.cubic_roots.clone(),
        phi_values: ce.phi_values.clone(),
        counterexample: ce,
        dim2,
        pass,
    };
    write_file(&path, &json_with_manifest(&manifest, &out)?)?;

    let ce = &out.counterexample;
    eprintln!("three-factor value        {}", fmt_short(ce.f_star));
    eprintln!(
        "f = 36ρ identity          max err {:.3e} over {} samples",
        ce.identity_max_err, ce.identity_samples
    );
    eprintln!(
        "symmetric supremum        {} (jacobi {})",
        fmt_short(ce.f_sup_found),
        fmt_short(ce.f_sup_jacobi)
    );
    eprintln!(
        "sup ρ found               {} (bound {})",
        fmt_short(ce.rho_sup_found),
        fmt_short(ce.bound)
    );
    eprintln!("cubic roots               {:?}", ce.cubic_roots);
    eprintln!("φ at stationary branches  {:?}", ce.phi_values);
    for r in &out.dim2 {
        eprintln!(
            "n=2 γ={:<8} max σ={:.3e} max excess={:.3e} holds={}",
            fmt_short(r.gamma),
            r.max_sigma,
            r.max_excess,
            r.holds
        );
    }
    eprintln!("pass                      {}", out.pass);
    Ok(if out.pass { EXIT_OK } else { EXIT_INCONSISTENT })
}

pub struct GenerateArgs {
    pub kind: GenerateKind,
    pub name: Option<String>,
    pub n: usize,
    pub weights: Option<Vec<f64>>,
    pub g: f64,
    pub gamma: f64,
    pub format: Format,
    pub output: Option<PathBuf>,
}

pub fn generate(g: &GlobalOpts, args: &GenerateArgs) -> CmdResult {
    let bad = |msg: String| Failure::new(EXIT_OTHER, msg);
    // `generate odeco 5` takes n positionally
    let n = match (&args.kind, &args.name) {
        (GenerateKind::PaperExample, _) | (_, None) => args.n,
        (_, Some(s)) => s
            .parse::<usize>()
            .map_err(|_| bad(format!("expected a dimension, got {s:?}")))?,
    };
    let (a, label) = match args.kind {
        GenerateKind::Odeco => match &args.weights {
            Some(w) => {
                let basis = OrthoMatrix::random_special(w.len(), &mut rng_from_seed(g.seed));
                (from_weights_and_basis(w, &basis)?, "odeco".to_string())
            }
            None => (random_odeco(n, g.seed)?, "odeco".to_string()),
        },
        GenerateKind::Pd => (random_pd(n, g.seed)?, "pd".to_string()),
        GenerateKind::Random => (random_symmetric(n, g.seed)?, "random".to_string()),
        GenerateKind::PaperExample => {
            let name = args
                .name
                .as_deref()
                .ok_or_else(|| bad("paper-example needs a name".into()))?;
            let a = match name {
                "symmetrizer-123" => symmetrizer_123(),
                "pd4-threequarters" => pd4_three_quarters(),
                "lmd3" => lmd3(args.g, args.gamma),
                other => {
                    return Err(bad(format!(
                        "unknown example {other:?} (expected symmetrizer-123, pd4-threequarters or lmd3)"
                    )))
                }
            };
            (a, name.to_string())
        }
    };
    let ext = match args.format {
        Format::Text => "txt",
        Format::Json => "json",
    };
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| out_path(g, format!("{label}.{ext}")));
    let mut manifest = RunManifest::new(
        "generate",
        g,
        json!({
            "kind": args.kind,
            "name": args.name,
            "n": a.n(),
            "weights": args.weights,
            "g": args.g,
            "gamma": args.gamma,
            "format": args.format,
        }),
    );
    manifest.outputs.push(path.display().to_string());
    let body = match args.format {
        Format::Text => write_text_with_comments(&a, &manifest.comment_lines()),
        Format::Json => {
            let t: serde_json::Value = serde_json::from_str(&to_json(&a)?)
                .map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
            json_with_manifest(&manifest, &t)?
        }
    };
    write_file(&path, &body)?;
    eprintln!("wrote {} (n={}, ‖A‖²={})", path.display(), a.n(), fmt_short(a.norm_sq()));
    Ok(EXIT_OK)
}
