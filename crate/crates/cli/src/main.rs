//! `polarsvbrdf` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polarsvbrdf::exec::{with_threads, ExecMode};
use polarsvbrdf::forward::raster::rasterize;
use polarsvbrdf::forward::{channel_images, render_views, ModelKind, NoiseSpec, ObservationSet, Scene, Visibility};
use polarsvbrdf::inverse::{run_pipeline, truth_report, FrozenPositions, VertexEstimate};
use polarsvbrdf::io::tables::{summary_text, write_rows};
use polarsvbrdf::io::visualize::{
    aolp_hue_map, aolp_image, dop_image, heat_map, mueller_grid, parameter_maps, stokes_images, MUELLER_LEGEND,
};
use polarsvbrdf::io::{
    read_bundle, read_params, read_run_config, read_scene_document, write_bundle, write_iteration_log, write_params,
    write_pfm, write_truth_report, RunConfig, BUNDLE_VERSION,
};
use polarsvbrdf::observe::decompose;
use polarsvbrdf::sampling::perturb_normals;
use polarsvbrdf::validation::{ablation, format_table, heldout_views, run_suite, SuiteOptions, ALL_CRITERIA};
use polarsvbrdf::Vec3;
use rand::SeedableRng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "polarsvbrdf", version, about = "Polarimetric SVBRDF rendering and inverse rendering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene into channel rasters and an observation bundle.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Split a bundle into diffuse and polarization observables.
    Decompose {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-view observable rasters.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Recover per-vertex materials and normals from a bundle.
    Invert {
        #[arg(long)]
        bundle: PathBuf,
        /// Geometry (initial normals) and, for synthetic scenes, the truth.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// View used for the parameter maps.
        #[arg(long, default_value_t = 0)]
        map_view: usize,
        /// Skip the recovered-versus-truth report.
        #[arg(long)]
        no_truth: bool,
        /// Start from the scene materials instead of the default
        /// initialization.
        #[arg(long)]
        truth_init: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Invert with and without specular augmentation and compare.
    Ablate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Novel views used for the re-rendering comparison.
        #[arg(long, default_value_t = 40)]
        heldout_views: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write DoP, AoLP, Stokes or Mueller visualizations of one view.
    Visualize {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum)]
        mode: VisMode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        view: usize,
        /// Recovered parameter table used by the Mueller mode instead of the
        /// scene materials.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Model::Full)]
        model: Model,
    },
    /// Run the acceptance suite and print a pass/fail table.
    Validate {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
        /// Smaller scenes, same tolerances.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        sequential: bool,
        /// Write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Flip a Fresnel sign in the expanded diffuse lobe.
        #[arg(long, hide = true)]
        flip_fresnel_sign: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VisMode {
    Dop,
    Aolp,
    Mueller,
    Stokes,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Full,
    Coaxial,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Full => ModelKind::Full,
            Model::Coaxial => ModelKind::Coaxial,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseKind {
    None,
    Realistic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VisibilityArg {
    Backface,
    Depthbuffer,
}

/// Run configuration: a JSON file and per-field overrides.
#[derive(Args, Clone, Debug, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    lambda4: Option<f64>,
    #[arg(long)]
    lambda_g: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    virtuals: Option<usize>,
    #[arg(long, value_enum)]
    noise: Option<NoiseKind>,
    #[arg(long)]
    render_seed: Option<u64>,
    #[arg(long)]
    inverse_seed: Option<u64>,
    #[arg(long)]
    perturbation_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    flash_levels: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long, value_enum)]
    visibility: Option<VisibilityArg>,
    #[arg(long)]
    fix_sigma_ss: bool,
    #[arg(long)]
    normal_perturbation_deg: Option<f64>,
    #[arg(long)]
    max_failure_fraction: Option<f64>,
    /// Worker threads; the global pool when omitted.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    sequential: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => read_run_config(p)?,
            None => RunConfig::default(),
        };
        let w = &mut c.weights;
        set(&mut w.lambda1, self.lambda1);
        set(&mut w.lambda2, self.lambda2);
        set(&mut w.lambda3, self.lambda3);
        set(&mut w.lambda4, self.lambda4);
        set(&mut w.lambda_g, self.lambda_g);
        set(&mut c.iterations, self.iterations);
        set(&mut c.clusters, self.clusters);
        set(&mut c.virtuals, self.virtuals);
        if let Some(n) = self.noise {
            c.noise = match n {
                NoiseKind::None => NoiseSpec::None,
                NoiseKind::Realistic => NoiseSpec::realistic(),
            };
        }
        set(&mut c.seeds.render, self.render_seed);
        set(&mut c.seeds.inverse, self.inverse_seed);
        set(&mut c.seeds.perturbation, self.perturbation_seed);
        set(&mut c.flash_levels, self.flash_levels.clone());
        set(&mut c.model, self.model.map(Into::into));
        set(
            &mut c.visibility,
            self.visibility.map(|v| match v {
                VisibilityArg::Backface => Visibility::BackFace,
                VisibilityArg::Depthbuffer => Visibility::DepthBuffer,
            }),
        );
        c.fix_sigma_ss |= self.fix_sigma_ss;
        set(&mut c.normal_perturbation_deg, self.normal_perturbation_deg);
        set(&mut c.max_failure_fraction, self.max_failure_fraction);
        c.validate()?;
        Ok(c)
    }

    fn mode(&self) -> ExecMode {
        if self.sequential {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }
}

fn set<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))
}

fn load_scene(path: &Path) -> Result<Scene> {
    let doc = read_scene_document(path)?;
    doc.to_scene().with_context(|| format!("invalid scene {}", path.display()))
}

fn check_bundle(obs: &ObservationSet, scene: &Scene) -> Result<()> {
    if obs.n_vertices != scene.vertices.len() || obs.n_views != scene.views.len() {
        bail!(
            "bundle has {} vertices and {} views but the scene has {} and {}",
            obs.n_vertices,
            obs.n_views,
            scene.vertices.len(),
            scene.views.len()
        );
    }
    Ok(())
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

const CHANNEL_NAMES: [&str; 4] = ["i0", "i45", "i90", "i135"];

fn render(scene_path: &Path, out: &Path, args: &ConfigArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let scene = load_scene(scene_path)?;
    create_dir(out)?;
    let obs = with_threads(args.threads, || render_views(&scene, &cfg.render_config(), args.mode()))?;
    let mut files = Vec::new();
    for v in 0..scene.views.len() {
        for (img, name) in channel_images(&scene, &obs, v).iter().zip(CHANNEL_NAMES) {
            let file = format!("view{v:03}_{name}.pfm");
            write_pfm(&out.join(&file), img)?;
            files.push(file);
        }
    }
    write_bundle(&out.join("observations.bin"), &obs)?;
    files.push("observations.bin".into());
    write_json(&out.join("config.json"), &serde_json::to_value(&cfg)?)?;
    let manifest = json!({
        "scene": scene_path.display().to_string(),
        "config_hash": cfg.hash(),
        "seeds": cfg.seeds,
        "config": cfg,
        "bundle_version": BUNDLE_VERSION,
        "vertices": obs.n_vertices,
        "views": obs.n_views,
        "observations": obs.len(),
        "files": files,
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("rendered {} observations of {} vertices in {} views to {}", obs.len(), obs.n_vertices, obs.n_views, out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct ObservableRow {
    vertex: u32,
    view: u32,
    i_d_r: f64,
    i_d_g: f64,
    i_d_b: f64,
    i_alpha_r: f64,
    i_alpha_g: f64,
    i_alpha_b: f64,
    i_s_r: f64,
    i_s_g: f64,
    i_s_b: f64,
}

fn decompose_cmd(bundle: &Path, out: &Path, scene: Option<&Path>) -> Result<ExitCode> {
    let obs = read_bundle(bundle)?;
    create_dir(out)?;
    let rows: Vec<ObservableRow> = obs
        .all()
        .iter()
        .map(|o| {
            let d = decompose(&o.channels);
            ObservableRow {
                vertex: o.vertex_id,
                view: o.view_id,
                i_d_r: d.i_d[0],
                i_d_g: d.i_d[1],
                i_d_b: d.i_d[2],
                i_alpha_r: d.i_alpha[0],
                i_alpha_g: d.i_alpha[1],
                i_alpha_b: d.i_alpha[2],
                i_s_r: d.i_s[0],
                i_s_g: d.i_s[1],
                i_s_b: d.i_s[2],
            }
        })
        .collect();
    write_rows(&out.join("observables.csv"), &rows)?;
    if let Some(path) = scene {
        let scene = load_scene(path)?;
        check_bundle(&obs, &scene)?;
        let all = obs.all();
        for v in 0..scene.views.len() {
            let parts: [(&str, fn(&polarsvbrdf::observe::Decomposed) -> [f64; 3]); 3] =
                [("i_d", |d| d.i_d), ("i_alpha", |d| d.i_alpha), ("i_s", |d| d.i_s)];
            for (name, f) in parts {
                let img = rasterize(&scene, &obs, v, 3, |i| f(&decompose(&all[i].channels)).iter().map(|&x| x as f32).collect());
                write_pfm(&out.join(format!("view{v:03}_{name}.pfm")), &img)?;
            }
        }
    }
    println!("decomposed {} observations to {}", obs.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn initial_normals(scene: &Scene, cfg: &RunConfig) -> Vec<Vec3> {
    let normals: Vec<Vec3> = scene.vertices.iter().map(|v| v.normal).collect();
    if cfg.normal_perturbation_deg > 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seeds.perturbation);
        perturb_normals(&normals, cfg.normal_perturbation_deg.to_radians(), &mut rng)
    } else {
        normals
    }
}

fn write_maps(dir: &Path, scene: &Scene, obs: &ObservationSet, view: usize, est: &[VertexEstimate]) -> Result<()> {
    create_dir(dir)?;
    for (name, img) in parameter_maps(scene, obs, view, est) {
        write_pfm(&dir.join(format!("{name}.pfm")), &img)?;
    }
    Ok(())
}

fn invert(bundle: &Path, scene_path: &Path, out: &Path, map_view: usize, no_truth: bool, truth_init: bool, args: &ConfigArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let obs = read_bundle(bundle)?;
    let scene = load_scene(scene_path)?;
    check_bundle(&obs, &scene)?;
    if map_view >= scene.views.len() {
        bail!("map view {map_view} out of range (scene has {} views)", scene.views.len());
    }
    create_dir(out)?;
    let init = initial_normals(&scene, &cfg);
    let truth_params: Vec<_> = scene.vertices.iter().map(|v| v.params).collect();
    let init_params = truth_init.then_some(truth_params.as_slice());
    let result = with_threads(args.threads, || {
        run_pipeline(&obs, &init, init_params, &cfg.inverse_config(), args.mode(), &mut FrozenPositions)
    })?;
    write_params(&out.join("params.csv"), &result.estimates)?;
    write_iteration_log(&out.join("iterations.csv"), &result.log)?;
    if !no_truth {
        let normals: Vec<Vec3> = scene.vertices.iter().map(|v| v.normal).collect();
        let report = truth_report(&result.estimates, &truth_params, &normals);
        write_truth_report(&out.join("truth.csv"), &out.join("truth_summary.txt"), &report)?;
        print!("{}", summary_text(&report.summary));
    }
    write_maps(&out.join("maps"), &scene, &obs, map_view, &result.estimates)?;
    let failed = result.hard_failures();
    let fraction = failed as f64 / result.estimates.len().max(1) as f64;
    println!("{failed} of {} vertices failed ({:.2}%)", result.estimates.len(), 100.0 * fraction);
    if fraction > cfg.max_failure_fraction {
        eprintln!(
            "error: hard failures {:.2}% exceed the allowed {:.2}%",
            100.0 * fraction,
            100.0 * cfg.max_failure_fraction
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn ablate(bundle: &Path, scene_path: &Path, out: &Path, heldout: usize, args: &ConfigArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let obs = read_bundle(bundle)?;
    let scene = load_scene(scene_path)?;
    check_bundle(&obs, &scene)?;
    create_dir(out)?;
    let views = heldout_views(heldout.max(1), cfg.seeds.render);
    let (o, with, without) =
        with_threads(args.threads, || ablation(&scene, &obs, &cfg.inverse_config(), &views, args.mode()))?;
    write_params(&out.join("params_with.csv"), &with.estimates)?;
    write_params(&out.join("params_without.csv"), &without.estimates)?;
    let summary = json!({
        "sigma_s_median_rel_err_with": o.sigma_s_err_with,
        "sigma_s_median_rel_err_without": o.sigma_s_err_without,
        "psnr_with_db": o.psnr_with,
        "psnr_without_db": o.psnr_without,
        "psnr_gain_db": o.psnr_with - o.psnr_without,
        "heldout_views": views.len(),
    });
    write_json(&out.join("ablation.json"), &summary)?;
    println!(
        "sigma_s median relative error: {:.2}% with augmentation, {:.2}% without",
        100.0 * o.sigma_s_err_with,
        100.0 * o.sigma_s_err_without
    );
    println!("re-rendered PSNR: {:.2} dB with, {:.2} dB without ({:+.2} dB)", o.psnr_with, o.psnr_without, o.psnr_with - o.psnr_without);
    Ok(ExitCode::SUCCESS)
}

fn visualize(bundle: &Path, scene_path: &Path, mode: VisMode, out: &Path, view: usize, params: Option<&Path>, model: Model) -> Result<ExitCode> {
    let obs = read_bundle(bundle)?;
    let scene = load_scene(scene_path)?;
    check_bundle(&obs, &scene)?;
    if view >= scene.views.len() {
        bail!("view {view} out of range (scene has {} views)", scene.views.len());
    }
    create_dir(out)?;
    let channels = channel_images(&scene, &obs, view);
    match mode {
        VisMode::Dop => {
            let dop = dop_image(&channels);
            write_pfm(&out.join("dop.pfm"), &dop)?;
            write_pfm(&out.join("dop_heat.pfm"), &heat_map(&dop, 0.0, 1.0))?;
        }
        VisMode::Aolp => {
            let (aolp, mask) = aolp_image(&channels);
            write_pfm(&out.join("aolp.pfm"), &aolp)?;
            write_pfm(&out.join("aolp_hue.pfm"), &aolp_hue_map(&aolp, &mask))?;
        }
        VisMode::Stokes => {
            for (img, name) in stokes_images(&channels).iter().zip(["s0", "s1", "s2"]) {
                write_pfm(&out.join(format!("{name}.pfm")), img)?;
            }
        }
        VisMode::Mueller => {
            let est = params.map(read_params).transpose()?;
            let p: Option<Vec<_>> = est.map(|e| e.iter().map(|x| x.params).collect());
            if let Some(p) = &p {
                if p.len() != scene.vertices.len() {
                    bail!("parameter table has {} rows but the scene has {} vertices", p.len(), scene.vertices.len());
                }
            }
            let grid = mueller_grid(&scene, &obs, view, p.as_deref(), model.into())?;
            write_pfm(&out.join("mueller.pfm"), &grid)?;
            std::fs::write(out.join("mueller_legend.txt"), MUELLER_LEGEND)
                .with_context(|| format!("cannot write legend in {}", out.display()))?;
        }
    }
    println!("wrote {mode:?} visualization of view {view} to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn validate(criteria: Vec<u8>, quick: bool, sequential: bool, json_path: Option<&Path>, flip: bool) -> Result<ExitCode> {
    if let Some(bad) = criteria.iter().find(|c| !ALL_CRITERIA.contains(c)) {
        bail!("unknown criterion {bad}; valid criteria are 1-10");
    }
    let opts = SuiteOptions {
        criteria,
        quick,
        mode: if sequential { ExecMode::Sequential } else { ExecMode::Parallel },
        flip_fresnel_sign: flip,
    };
    let results = run_suite(&opts, &mut |r| {
        eprintln!("criterion {} {}", r.id, if r.pass { "passed" } else { "FAILED" });
    });
    print!("{}", format_table(&results));
    if let Some(p) = json_path {
        write_json(p, &serde_json::to_value(&results)?)?;
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        eprintln!("error: {failed} criteria failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Render { scene, out, cfg } => render(&scene, &out, &cfg),
        Command::Decompose { bundle, out, scene } => decompose_cmd(&bundle, &out, scene.as_deref()),
        Command::Invert { bundle, scene, out, map_view, no_truth, truth_init, cfg } => {
            invert(&bundle, &scene, &out, map_view, no_truth, truth_init, &cfg)
        }
        Command::Ablate { bundle, scene, out, heldout_views, cfg } => ablate(&bundle, &scene, &out, heldout_views, &cfg),
        Command::Visualize { bundle, scene, mode, out, view, params, model } => {
            visualize(&bundle, &scene, mode, &out, view, params.as_deref(), model)
        }
        Command::Validate { criteria, quick, sequential, json, flip_fresnel_sign } => {
            validate(criteria, quick, sequential, json.as_deref(), flip_fresnel_sign)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
