use std::time::Instant;

use anyhow::bail;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use jsrkit::bounds::{
    estimate, lower_bound_periodic, upper_bounds_up_to, EstimateConfig, JsrBounds, MatrixNorm,
};
use jsrkit::mather::{
    build_mather_approx_with, minimal_set_diagnostic, recurrent_ratio_check, MatherApprox,
    MatherConfig, DEFAULT_LOOKBACK, DEFAULT_TOL,
};
use jsrkit::norms::{barabanov_iterate, BarabanovConfig, BarabanovMethod, NormModel};
use jsrkit::ratio::{
    optimal_periodic_ratio, ratio_curve_with, ratio_equivalence_check, DEFAULT_SLACK,
};
use jsrkit::reducibility::{
    find_common_invariant_subspace, is_real_reducible, product_boundedness, triangularise,
    Boundedness, BoundednessConfig, TriangulariseConfig, SUBSPACE_SEED,
};
use jsrkit::stability::{classify, MarkovChainSpec, StabilityConfig};
use jsrkit::subadditive::{beta_sandwich, fekete_limit, MatrixObservable};
use jsrkit::symbolic::{strongly_connected_components, DEFAULT_WORD_CAP};
use jsrkit::{Error, MatrixSet};

use crate::input::{load, parse_grid, sha256_hex, Family};

pub struct Context {
    pub threads: Option<usize>,
    pub output: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub input_hash: String,
    pub config: Value,
    pub result: Value,
    pub timings: Timings,
}

#[derive(Serialize, Deserialize)]
pub struct Timings {
    pub elapsed_ms: f64,
}

fn emit(
    ctx: &Context,
    command: &str,
    hash: String,
    config: Value,
    result: Value,
    start: Instant,
) -> anyhow::Result<()> {
    let mut config = config;
    config["threads"] = json!(ctx.threads);
    let report = Report {
        command: command.into(),
        input_hash: hash,
        config,
        result,
        timings: Timings {
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    };
    let text = serde_json::to_string_pretty(&report)?;
    match &ctx.output {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NormFlag {
    /// Spectral norm.
    Op,
    /// d times the largest entry modulus.
    Max,
}

impl NormFlag {
    fn norm(self) -> MatrixNorm {
        match self {
            NormFlag::Op => MatrixNorm::Operator,
            NormFlag::Max => MatrixNorm::MaxEntry,
        }
    }
}

#[derive(Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: String,
    /// Stop once upper - lower <= gap.
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    #[arg(long, default_value_t = 24)]
    pub max_depth: usize,
    /// Node budget across all depths.
    #[arg(long, default_value_t = 1 << 22)]
    pub max_nodes: u64,
    #[arg(long, value_enum, default_value_t = NormFlag::Op)]
    pub norm: NormFlag,
}

impl EstimateArgs {
    fn config(&self) -> EstimateConfig {
        EstimateConfig {
            gap: self.gap,
            max_depth: self.max_depth,
            max_nodes: self.max_nodes,
            norm: self.norm.norm(),
        }
    }
}

pub fn cmd_estimate(ctx: &Context, a: EstimateArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let inp = load(&a.input)?;
    let set = inp.doc.set()?;
    let cfg = a.config();
    let b = estimate(&set, &cfg)?;
    emit(
        ctx,
        "estimate",
        inp.hash,
        json!({ "flags": a, "estimate": cfg }),
        serde_json::to_value(b)?,
        start,
    )
}

#[derive(Args, Serialize)]
pub struct BoundsArgs {
    #[arg(long)]
    pub input: String,
    /// Largest product length for the norm bounds.
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
    /// Largest period for the spectral-radius bound.
    #[arg(long, default_value_t = 8)]
    pub max_period: usize,
    #[arg(long, value_enum, default_value_t = NormFlag::Op)]
    pub norm: NormFlag,
}

pub fn cmd_bounds(ctx: &Context, a: BoundsArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let inp = load(&a.input)?;
    let set = inp.doc.set()?;
    let per_depth = upper_bounds_up_to(&set, a.depth, &a.norm.norm())?;
    let upper = per_depth.iter().cloned().fold(f64::INFINITY, f64::min);
    let (lower, witness) = lower_bound_periodic(&set, a.max_period, DEFAULT_WORD_CAP)?;
    let result = json!({
        "upper_by_depth": per_depth,
        "upper": upper,
        "lower": lower,
        "lower_witness": witness,
    });
    emit(
        ctx,
        "bounds",
        inp.hash,
        json!({ "flags": a, "word_cap": DEFAULT_WORD_CAP }),
        result,
        start,
    )
}

#[derive(Args, Serialize)]
pub struct TriangulariseArgs {
    #[arg(long)]
    pub input: String,
    /// Invariance residual tolerance (relative to the largest norm).
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Gap for the per-block radius estimates.
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    #[arg(long, default_value_t = 16)]
    pub max_depth: usize,
}

pub fn cmd_triangularise(ctx: &Context, a: TriangulariseArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let inp = load(&a.input)?;
    let set = inp.doc.set()?;
    let cfg = TriangulariseConfig {
        tol: a.tol,
        estimate: EstimateConfig {
            gap: a.gap,
            max_depth: a.max_depth,
            ..EstimateConfig::default()
        },
    };
    let t = triangularise(&set, &cfg)?;
    let config = json!({ "flags": a, "triangularise": cfg, "subspace_seed": SUBSPACE_SEED });
    emit(
        ctx,
        "triangularise",
        inp.hash,
        config,
        serde_json::to_value(t)?,
        start,
    )
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodFlag {
    Auto,
    Grid,
    Polytope,
}

#[derive(Args, Serialize, Clone)]
pub struct BarabanovFlags {
    #[arg(long, value_enum, default_value_t = MethodFlag::Auto)]
    pub method: MethodFlag,
    /// Grid directions on [0, pi) in two dimensions.
    #[arg(long, default_value_t = 2048)]
    pub resolution: usize,
    #[arg(long, default_value_t = 20_000)]
    pub max_iters: usize,
    /// Convergence tolerance of the iteration.
    #[arg(long, default_value_t = 1e-10)]
    pub barabanov_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub vertex_cap: usize,
    /// Seed for random test directions.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

impl BarabanovFlags {
    fn config(&self) -> BarabanovConfig {
        BarabanovConfig {
            method: match self.method {
                MethodFlag::Auto => BarabanovMethod::Auto,
                MethodFlag::Grid => BarabanovMethod::Grid,
                MethodFlag::Polytope => BarabanovMethod::Polytope,
            },
            resolution: self.resolution,
            max_iters: self.max_iters,
            tol: self.barabanov_tol,
            vertex_cap: self.vertex_cap,
            seed: self.seed,
            ..BarabanovConfig::default()
        }
    }
}

#[derive(Args, Serialize)]
pub struct BarabanovArgs {
    #[arg(long)]
    pub input: String,
    #[command(flatten)]
    pub barabanov: BarabanovFlags,
    /// Gap of the radius estimate the result is checked against.
    #[arg(long, default_value_t = 1e-3)]
    pub gap: f64,
    #[arg(long, default_value_t = 16)]
    pub max_depth: usize,
}

pub fn cmd_barabanov(ctx: &Context, a: BarabanovArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let inp = load(&a.input)?;
    let set = inp.doc.set()?;
    let ecfg = EstimateConfig {
        gap: a.gap,
        max_depth: a.max_depth,
        ..EstimateConfig::default()
    };
    let bounds = estimate(&set, &ecfg)?;
    let bcfg = a.barabanov.config();
    let cert = barabanov_iterate(&set, &bcfg, Some(&bounds))?;
    let config = json!({ "flags": a, "barabanov": bcfg, "estimate": ecfg });
    emit(
        ctx,
        "barabanov",
        inp.hash,
        config,
        json!({ "certificate": cert, "bounds": bounds }),
        start,
    )
}

#[derive(Args, Serialize)]
pub struct MatherArgs {
    #[arg(long)]
    pub input: String,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    /// Relative per-step slack of the survivor condition.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Symbols every survivor must be left-extendable by.
    #[arg(long, default_value_t = DEFAULT_LOOKBACK)]
    pub lookback: usize,
    /// Write the survivor graph here in DOT format.
    #[arg(long)]
    pub dot: Option<String>,
    /// Write depth-n survivors and their final trace value here as CSV.
    #[arg(long)]
    pub csv: Option<String>,
    /// Symbol whose frequency ranges are reported.
    #[arg(long, default_value_t = 1)]
    pub symbol: u16,
    /// Period cap for the periodic-witness frequency range.
    #[arg(long, default_value_t = 8)]
    pub max_period: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub gap: f64,
    #[arg(long, default_value_t = 16)]
    pub max_depth: usize,
    #[command(flatten)]
    pub barabanov: BarabanovFlags,
}

#[derive(Serialize)]
struct NormChoice {
    source: &'static str,
    /// Path of block choices ("upper"/"lower") when triangularisation was used.
    blocks: Vec<&'static str>,
    rho_hat: f64,
    bounds: JsrBounds,
}

/// Extremal norm for the Mather builder: a Barabanov norm when the set is
/// real, irreducible and small; otherwise a certificate of product
/// boundedness; otherwise descend into the dominant diagonal block.
fn mather_input(
    set: &MatrixSet,
    ecfg: &EstimateConfig,
    bcfg: &BarabanovConfig,
    blocks: &mut Vec<&'static str>,
) -> anyhow::Result<(MatrixSet, NormModel, NormChoice)> {
    let bounds = estimate(set, ecfg)?;
    let d = set.dim();
    if d == 1 {
        let rho = set.max_operator_norm();
        let c = NormChoice {
            source: "scalar",
            blocks: blocks.clone(),
            rho_hat: rho,
            bounds,
        };
        return Ok((set.clone(), NormModel::Euclidean, c));
    }
    if set.is_real() && d <= 4 && !is_real_reducible(set, bcfg.irreducibility_tol)? {
        let cert = barabanov_iterate(set, bcfg, Some(&bounds))?;
        let c = NormChoice {
            source: "barabanov",
            blocks: blocks.clone(),
            rho_hat: cert.rho_hat,
            bounds,
        };
        return Ok((set.clone(), cert.norm, c));
    }
    let verdict = product_boundedness(set, &BoundednessConfig::default())?;
    if let (Boundedness::Bounded, Some(nu)) = (verdict.status, verdict.certificate) {
        let c = NormChoice {
            source: "boundedness",
            blocks: blocks.clone(),
            rho_hat: verdict.rho_hat,
            bounds,
        };
        return Ok((set.clone(), nu, c));
    }
    if find_common_invariant_subspace(set, 1e-9)?.is_some() {
        let t = triangularise(set, &TriangulariseConfig::default())?;
        let (next, tag) = if t.lower_bounds.lower > t.upper_bounds.lower {
            (t.lower_blocks, "lower")
        } else {
            (t.upper_blocks, "upper")
        };
        blocks.push(tag);
        return mather_input(&next, ecfg, bcfg, blocks);
    }
    bail!(Error::Inconsistent(
        "no extremal norm could be certified for this set".into()
    ))
}

pub fn cmd_mather(ctx: &Context, a: MatherArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let inp = load(&a.input)?;
    let set = inp.doc.set()?;
    let ecfg = EstimateConfig {
        gap: a.gap,
        max_depth: a.max_depth,
        ..EstimateConfig::default()
    };
    let bcfg = a.barabanov.config();
    let (work, nu, choice) = mather_input(&set, &ecfg, &bcfg, &mut Vec::new())?;
    let mcfg = MatherConfig {
        max_depth: a.depth,
        tol: a.tol,
        lookback: a.lookback,
        word_cap: DEFAULT_WORD_CAP,
    };
    let approx = build_mather_approx_with(&work, &nu, choice.rho_hat, &mcfg)?;
    if let Some(path) = &a.dot {
        std::fs::write(path, approx.to_dot())?;
    }
    if let Some(path) = &a.csv {
        write_survivor_csv(path, &approx)?;
    }
    let rec = recurrent_ratio_check(&approx, &work)?;
    let freq = ratio_equivalence_check(&work, a.symbol, &approx, a.max_period)?;
    let sccs = strongly_connected_components(&approx.graph);
    let top: Vec<String> = approx
        .words_at(a.depth)
        .iter()
        .map(|w| w.to_string())
        .collect();
    let counts: Vec<usize> = approx.survivors.iter().map(Vec::len).collect();
    let result = json!({
        "norm": nu,
        "norm_choice": choice,
        "survivor_counts": counts,
        "survivors": top,
        "proper": approx.is_proper(),
        "min_log_trace": approx.min_trace(),
        "minimal_set": minimal_set_diagnostic(&approx),
        "scc_count": sccs.len(),
        "graph_edges": approx.graph.edges().len(),
        "recurrence": rec,
        "frequencies": freq,
    });
    let config = json!({
        "flags": a,
        "mather": mcfg,
        "estimate": ecfg,
        "barabanov": bcfg,
        "boundedness": BoundednessConfig::default(),
        "triangularise": TriangulariseConfig::default(),
        "subspace_seed": SUBSPACE_SEED,
        "ratio_slack": DEFAULT_SLACK,
    });
    emit(ctx, "mather", inp.hash, config, result, start)
}

fn write_survivor_csv(path: &str, approx: &MatherApprox) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["word", "min_log_trace", "final_log_trace"])?;
    for s in approx.at(approx.max_depth()) {
        let min = s.log_trace.iter().cloned().fold(f64::INFINITY, f64::min);
        let last = s.log_trace.last().copied().unwrap_or(0.0);
        w.write_record([s.word.to_string(), min.to_string(), last.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Args, Serialize)]
pub struct StabilityArgs {
    #[arg(long)]
    pub input: String,
    #[arg(long, default_value_t = 8)]
    pub max_period: usize,
    /// Depth cap for the radius estimate.
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    #[arg(long, default_value_t = 200)]
    pub horizon: usize,
    #[arg(long, default_value_t = 64)]
    pub trials: usize,
    /// Overrides the chain seed (or seeds the default uniform chain).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 8)]
    pub mather_depth: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub mather_tol: f64,
}

pub fn cmd_stability(ctx: &Context, a: StabilityArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let inp = load(&a.input)?;
    let set = inp.doc.set()?;
    let mut chain = inp
        .doc
        .chain
        .clone()
        .unwrap_or_else(|| MarkovChainSpec::uniform(set.len(), 0));
    if let Some(s) = a.seed {
        chain.rng_seed = s;
    }
    let cfg = StabilityConfig {
        max_period: a.max_period,
        estimate: EstimateConfig {
            gap: a.gap,
            max_depth: a.depth,
            ..EstimateConfig::default()
        },
        horizon: a.horizon,
        trials: a.trials,
        mather_depth: a.mather_depth,
        mather_tol: a.mather_tol,
    };
    let r = classify(&set, &cfg, &chain)?;
    let config = json!({ "flags": a, "stability": cfg, "chain": chain });
    emit(
        ctx,
        "stability",
        inp.hash,
        config,
        serde_json::to_value(r)?,
        start,
    )
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyFlag {
    /// {[[1,1],[0,1]], alpha [[1,0],[1,1]]}
    Hmst,
}

#[derive(Args, Serialize)]
pub struct OneRatioArgs {
    /// Matrix set, or a document with a family section.
    #[arg(long)]
    pub input: Option<String>,
    /// Built-in family (ignores --input).
    #[arg(long, value_enum)]
    pub family: Option<FamilyFlag>,
    /// Parameter grid start:end:step; overrides the document's grid.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub symbol: u16,
    #[arg(long, default_value_t = 10)]
    pub max_period: usize,
    /// Relative slack for near-optimal witnesses.
    #[arg(long, default_value_t = DEFAULT_SLACK)]
    pub slack: f64,
    /// Write the curve as CSV here ("-" for stdout, replacing the report).
    #[arg(long)]
    pub csv: Option<String>,
}

pub fn cmd_one_ratio(ctx: &Context, a: OneRatioArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let (family, grid_text, hash, single) = match (a.family, &a.input) {
        (Some(FamilyFlag::Hmst), _) => (
            Some(Family::Hmst),
            a.grid.clone(),
            sha256_hex(b"family:hmst"),
            None,
        ),
        (None, Some(path)) => {
            let inp = load(path)?;
            match inp.doc.family.clone() {
                Some(f) => {
                    let g = a.grid.clone().or_else(|| f.grid.clone());
                    (Some(Family::Custom(f, inp.doc.dim)), g, inp.hash, None)
                }
                None => (None, None, inp.hash, Some(inp.doc.set()?)),
            }
        }
        (None, None) => bail!(Error::Domain(
            "one of --input or --family is required".into()
        )),
    };
    let config = json!({ "flags": a });
    if let Some(set) = single {
        let est = optimal_periodic_ratio(&set, a.symbol, a.max_period, a.slack)?;
        return emit(
            ctx,
            "one-ratio",
            hash,
            config,
            serde_json::to_value(est)?,
            start,
        );
    }
    let family = family.expect("family present");
    let Some(grid_text) = grid_text else {
        bail!(Error::Domain(
            "a family needs a grid (--grid start:end:step)".into()
        ));
    };
    let grid = parse_grid(&grid_text)?;
    let curve = ratio_curve_with(|al| family.at(al), &grid, a.symbol, a.max_period, a.slack)?;
    match a.csv.as_deref() {
        Some("-") => {
            curve.write_csv(std::io::stdout())?;
            Ok(())
        }
        Some(path) => {
            curve.write_csv(std::fs::File::create(path)?)?;
            emit(
                ctx,
                "one-ratio",
                hash,
                config,
                serde_json::to_value(curve)?,
                start,
            )
        }
        None => emit(
            ctx,
            "one-ratio",
            hash,
            config,
            serde_json::to_value(curve)?,
            start,
        ),
    }
}

#[derive(Args, Serialize)]
pub struct BetaArgs {
    #[arg(long)]
    pub input: String,
    /// Longest word for the inf-sup side.
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Longest period for the sup-inf side.
    #[arg(long, default_value_t = 8)]
    pub max_period: usize,
    #[arg(long, value_enum, default_value_t = NormFlag::Op)]
    pub norm: NormFlag,
}

pub fn cmd_beta(ctx: &Context, a: BetaArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let inp = load(&a.input)?;
    let set = inp.doc.set()?;
    let obs = MatrixObservable::new(&set, a.norm.norm())?;
    let s = beta_sandwich(&obs, set.len(), a.depth, a.max_period)?;
    let sums: Vec<f64> = s
        .per_depth
        .iter()
        .enumerate()
        .map(|(k, v)| v * (k + 1) as f64)
        .collect();
    let fekete = fekete_limit(&sums)?;
    let result = json!({
        "sandwich": s,
        "exp_lower": s.lower.exp(),
        "exp_upper": s.upper.exp(),
        "fekete": fekete,
    });
    emit(
        ctx,
        "beta",
        inp.hash,
        json!({ "flags": a, "word_cap": DEFAULT_WORD_CAP }),
        result,
        start,
    )
}
