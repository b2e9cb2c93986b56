use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use topo_relu::homology::{betti_numbers, SimplicialComplex};
use topo_relu::indicator_synth::{
    ball_network, representative_network, theoretical_size_bounds, torus_network, BoundsInput,
};
use topo_relu::nerve::{alpha_complex_2d, alpha_filtration_2d, cech_complex, rips_complex, sample_size_bound, PointCloud};
use topo_relu::pipeline::{repeated_pipeline, run_pipeline, scaling_experiment, PipelineConfig};
use topo_relu::relu_core::ReluNetwork;
use topo_relu::shapes_sampling::{monte_carlo_risk, MeasureSpec, Problem, RepresentativeSpec, Shape};
use topo_relu::{Error, Result};

#[derive(Parser)]
#[command(name = "topo-relu", version, about = "ReLU indicator synthesis and nerve homology experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Indicator network of a ball.
    SynthBall(Common),
    /// Indicator network of a solid torus (an annulus when d = 2).
    SynthTorus(Common),
    /// Union network for a representative.
    SynthRep(Common),
    /// Monte Carlo risk of a saved network.
    Risk(Common),
    /// Betti numbers of a complex file.
    Betti(Common),
    /// Cech (or Rips) complex of a point cloud.
    Cech(Common),
    /// Alpha complex of a planar point cloud.
    Alpha2d(Common),
    /// Closed-form size/depth terms and the sample bound.
    Bounds(Common),
    /// End-to-end classification experiment.
    Pipeline(Common),
    /// Size against beta for unions of balls.
    Scaling(Common),
}

fn load<T: DeserializeOwned>(c: &Common, default: impl FnOnce() -> T) -> Result<T> {
    match &c.config {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(default()),
    }
}

fn require<T: DeserializeOwned>(c: &Common, what: &str) -> Result<T> {
    let p = c.config.as_ref().ok_or_else(|| Error::Input(format!("--config is required ({what})")))?;
    Ok(serde_json::from_str(&fs::read_to_string(p)?)?)
}

fn write_json(dir: &Path, name: &str, v: &impl Serialize) -> Result<()> {
    fs::write(dir.join(name), serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn default_measure(shapes: &[Shape], m: Option<MeasureSpec>) -> Result<MeasureSpec> {
    match m {
        Some(m) => Ok(m),
        None => MeasureSpec::box_around(shapes, 1.0),
    }
}

#[derive(Serialize, Deserialize)]
struct BallConfig {
    d: usize,
    r: f64,
    #[serde(default)]
    center: Option<Vec<f64>>,
    eps: f64,
    #[serde(default)]
    measure: Option<MeasureSpec>,
}

#[derive(Serialize, Deserialize)]
struct TorusConfig {
    d: usize,
    r: f64,
    big_r: f64,
    #[serde(default)]
    center: Option<Vec<f64>>,
    eps: f64,
    #[serde(default)]
    measure: Option<MeasureSpec>,
}

#[derive(Serialize, Deserialize)]
struct RepConfig {
    spec: RepresentativeSpec,
    eps: f64,
    #[serde(default)]
    measure: Option<MeasureSpec>,
}

#[derive(Serialize, Deserialize)]
struct RiskConfig {
    network: PathBuf,
    problem: Problem,
    n_samples: usize,
}

#[derive(Serialize, Deserialize)]
struct BettiConfig {
    complex: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CechConfig {
    points: PathBuf,
    r: f64,
    max_dim: usize,
    #[serde(default)]
    rips: bool,
}

#[derive(Serialize, Deserialize)]
struct AlphaConfig {
    points: PathBuf,
    r: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleConfig {
    vol: f64,
    d: usize,
    tau: f64,
    eps: f64,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct BoundsConfig {
    #[serde(default)]
    bounds: Option<BoundsInput>,
    #[serde(default)]
    sample: Option<SampleConfig>,
}

#[derive(Serialize, Deserialize)]
struct PipelineCliConfig {
    #[serde(flatten)]
    config: PipelineConfig,
    #[serde(default)]
    runs: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ScalingConfig {
    betas: Vec<usize>,
    eps: f64,
    d: usize,
}

fn run(cli: Cli) -> Result<()> {
    let (Cmd::SynthBall(c)
    | Cmd::SynthTorus(c)
    | Cmd::SynthRep(c)
    | Cmd::Risk(c)
    | Cmd::Betti(c)
    | Cmd::Cech(c)
    | Cmd::Alpha2d(c)
    | Cmd::Bounds(c)
    | Cmd::Pipeline(c)
    | Cmd::Scaling(c)) = &cli.cmd;
    let out = c.out.clone();
    fs::create_dir_all(&out)?;
    match &cli.cmd {
        Cmd::SynthBall(c) => {
            let cfg: BallConfig = load(c, || BallConfig { d: 2, r: 1.0, center: None, eps: 0.05, measure: None })?;
            let center = cfg.center.unwrap_or_else(|| vec![0.0; cfg.d]);
            let m = default_measure(&[Shape::ball(center.clone(), cfg.r)?], cfg.measure)?;
            let s = ball_network(cfg.d, cfg.r, &center, cfg.eps, &m)?;
            s.network.save(&out.join("network.json"))?;
            write_json(&out, "report.json", &s.report)?;
        }
        Cmd::SynthTorus(c) => {
            let cfg: TorusConfig =
                load(c, || TorusConfig { d: 3, r: 0.5, big_r: 2.0, center: None, eps: 0.2, measure: None })?;
            let center = cfg.center.unwrap_or_else(|| vec![0.0; cfg.d]);
            let m = default_measure(&[Shape::torus(center.clone(), cfg.r, cfg.big_r)?], cfg.measure)?;
            let s = torus_network(cfg.d, cfg.r, cfg.big_r, &center, cfg.eps, &m)?;
            s.network.save(&out.join("network.json"))?;
            write_json(&out, "report.json", &s.report)?;
        }
        Cmd::SynthRep(c) => {
            let cfg: RepConfig = load(c, || RepConfig {
                spec: PipelineConfig::annulus_vs_disk(0).problem.class1,
                eps: 0.1,
                measure: None,
            })?;
            let m = default_measure(&cfg.spec.components(), cfg.measure)?;
            let s = representative_network(&cfg.spec, cfg.eps, &m)?;
            s.network.save(&out.join("network.json"))?;
            write_json(&out, "report.json", &s.report)?;
        }
        Cmd::Risk(c) => {
            let cfg: RiskConfig = require(c, "network, problem and n_samples")?;
            let net = ReluNetwork::load(&cfg.network)?;
            let h = |x: &[f64]| net.eval_scalar(x).unwrap_or(f64::NAN);
            let r = monte_carlo_risk(&h, &cfg.problem, cfg.n_samples, c.seed.unwrap_or(0))?;
            write_json(&out, "report.json", &r)?;
        }
        Cmd::Betti(c) => {
            let cfg: BettiConfig = require(c, "a complex path")?;
            let k = SimplicialComplex::load(&cfg.complex)?;
            write_json(&out, "report.json", &betti_numbers(&k)?)?;
        }
        Cmd::Cech(c) => {
            let cfg: CechConfig = require(c, "points, r and max_dim")?;
            let cloud = PointCloud::load_csv(&cfg.points)?;
            let k = if cfg.rips {
                rips_complex(&cloud, cfg.r, cfg.max_dim)?
            } else {
                cech_complex(&cloud, cfg.r, cfg.max_dim)?
            };
            k.save(&out.join("complex.txt"))?;
            write_json(&out, "report.json", &betti_numbers(&k)?)?;
        }
        Cmd::Alpha2d(c) => {
            let cfg: AlphaConfig = require(c, "points and r")?;
            let cloud = PointCloud::load_csv(&cfg.points)?;
            let k = alpha_complex_2d(&cloud, cfg.r)?;
            k.save(&out.join("complex.txt"))?;
            let mut w = csv::Writer::from_path(out.join("filtration.csv"))?;
            w.write_record(["simplex", "value"])?;
            for (s, v) in alpha_filtration_2d(&cloud)? {
                w.write_record([s.to_string(), v.to_string()])?;
            }
            w.flush()?;
            write_json(&out, "report.json", &betti_numbers(&k)?)?;
        }
        Cmd::Bounds(c) => {
            let cfg: BoundsConfig = load(c, || BoundsConfig {
                bounds: Some(BoundsInput {
                    d: 2,
                    ambient_dim: 3,
                    beta: 2,
                    eps: 0.1,
                    tau: 0.5,
                    delta: 0.05,
                    n_samples: None,
                    simplices_k: None,
                    simplices_l: None,
                }),
                sample: Some(SampleConfig { vol: 1.0, d: 1, tau: 1.0, eps: 0.4, delta: 0.05 }),
            })?;
            let theory = cfg.bounds.as_ref().map(theoretical_size_bounds).transpose()?;
            let sample = cfg.sample.as_ref().map(|s| sample_size_bound(s.vol, s.d, s.tau, s.eps, s.delta)).transpose()?;
            write_json(&out, "report.json", &serde_json::json!({ "theoretical": theory, "sample_bound": sample }))?;
        }
        Cmd::Pipeline(c) => {
            let mut cfg: PipelineCliConfig =
                load(c, || PipelineCliConfig { config: PipelineConfig::annulus_vs_disk(0), runs: None })?;
            if let Some(s) = c.seed {
                cfg.config.seed = s;
            }
            match cfg.runs {
                None => write_json(&out, "report.json", &run_pipeline(&cfg.config)?)?,
                Some(n) => {
                    let reports = repeated_pipeline(&cfg.config, n)?;
                    let mut w = csv::Writer::from_path(out.join("runs.csv"))?;
                    w.write_record(["seed", "recovery", "risk", "risk_se", "risk_ok", "success", "h_size", "h_bound"])?;
                    for r in &reports {
                        w.write_record([
                            r.config.seed.to_string(),
                            r.recovery_success.to_string(),
                            r.risk.mean.to_string(),
                            r.risk.std_error.to_string(),
                            r.risk_success.to_string(),
                            r.success.to_string(),
                            r.h_size.to_string(),
                            r.h_size_bound.to_string(),
                        ])?;
                    }
                    w.flush()?;
                    write_json(&out, "report.json", &reports)?;
                }
            }
        }
        Cmd::Scaling(c) => {
            let cfg: ScalingConfig = load(c, || ScalingConfig { betas: vec![2, 4, 8, 16], eps: 0.5, d: 2 })?;
            let rep = scaling_experiment(&cfg.betas, cfg.eps, cfg.d, c.seed.unwrap_or(0))?;
            rep.write_csv(fs::File::create(out.join("scaling.csv"))?)?;
            write_json(&out, "report.json", &rep)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
