use std::fs;
use std::path::{Path, PathBuf};

use dicca_core::data::{
    load_dataset_from, load_idx, load_model, make_noisy_two_view_with, make_synthetic, save_model, write_csv_view,
    write_manifest, DatasetManifest, FileFormat, IdxData, LabelEntry, NoisyTwoViewOptions, PlantedStructure, ViewEntry,
};
use dicca_core::metrics::{group_dependency, mask_from_params, reconstruction_mse, support_f1, variance_explained_r2};
use dicca_core::model::{encode, sample_generative};
use dicca_core::optim::train;
use dicca_core::{DiccaConfig, DiccaParams, Matrix, MultiViewDataset, SupportMask};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SimulateSection, SimulationSource};
use crate::error::{CliError, CliResult};
use crate::heatmap;

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::write(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn load_data(path: &Path) -> CliResult<MultiViewDataset> {
    load_dataset_from(path).map_err(CliError::from_data)
}

fn load_trained(path: &Path) -> CliResult<(DiccaParams, DiccaConfig)> {
    load_model(path).map_err(CliError::from_data)
}

fn check_dims(config: &DiccaConfig, data: &MultiViewDataset) -> CliResult<()> {
    if data.dims() != config.dims {
        return Err(CliError::Shape(format!("data view widths {:?}, model expects {:?}", data.dims(), config.dims)));
    }
    Ok(())
}

/// Write each view as `<name>.csv`, optional labels, and a `dataset.toml`
/// manifest naming them.
fn write_dataset(dir: &Path, data: &MultiViewDataset) -> CliResult<PathBuf> {
    create_dir(dir)?;
    let mut views = Vec::new();
    for (m, view) in data.views().iter().enumerate() {
        let name = data.meta.view_names[m].clone();
        let file = PathBuf::from(format!("{name}.csv"));
        write_csv_view(dir.join(&file), view, Some(&numbered("x", view.cols())))
            .map_err(|e| CliError::Other(e.to_string()))?;
        views.push(ViewEntry { name, path: file, format: FileFormat::Csv });
    }
    let labels = match data.labels() {
        Some(l) => {
            let mut text = String::from("label\n");
            for v in l {
                text.push_str(&format!("{v}\n"));
            }
            write_text(&dir.join("labels.csv"), &text)?;
            Some(LabelEntry { path: "labels.csv".into(), format: FileFormat::Csv })
        }
        None => None,
    };
    let manifest = DatasetManifest { provenance: data.meta.provenance.clone(), standardize: false, views, labels };
    let path = dir.join("dataset.toml");
    write_manifest(&path, &manifest).map_err(|e| CliError::Other(e.to_string()))?;
    Ok(path)
}

/// Ground truth file read by `eval --truth`; extra fields are ignored.
#[derive(Debug, Serialize, Deserialize)]
struct TruthFile {
    mask: SupportMask,
}

#[derive(Serialize)]
struct PriorTruth<'a> {
    mask: SupportMask,
    /// `[view] -> (γ² of shared columns, γ² of private columns)`
    gamma_sq: &'a [(Vec<f64>, Vec<f64>)],
}

fn index_pair(pair: [usize; 2], widths: &[usize], field: &str) -> CliResult<(usize, usize)> {
    let [v, j] = pair;
    if v == 0 || v > widths.len() || j == 0 || j > widths[v - 1] {
        return Err(CliError::Config(format!("simulate.{field}: [{v}, {j}] is out of range (1-based [view, latent])")));
    }
    Ok((v - 1, j - 1))
}

fn planted_structure(cfg: &DiccaConfig, sim: &SimulateSection) -> CliResult<PlantedStructure> {
    let mut s = PlantedStructure::dense(cfg, sim.noise_std).with_generator(sim.generator);
    let k_shared = vec![cfg.k_shared; cfg.views()];
    for &pair in &sim.inactive_shared {
        let (m, j) = index_pair(pair, &k_shared, "inactive_shared")?;
        s = s.without_shared(m, j);
    }
    for &pair in &sim.inactive_private {
        let (m, j) = index_pair(pair, &cfg.k_private, "inactive_private")?;
        s.mask.private[m][j] = false;
    }
    Ok(s)
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut rc = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        rc.seed = s;
    }
    let sim = rc.simulate.clone().ok_or_else(|| CliError::Config("a [simulate] section is required".into()))?;
    if sim.n < 2 {
        return Err(CliError::Config(format!("simulate.n: must be >= 2, got {}", sim.n)));
    }
    if sim.dims.is_empty() {
        return Err(CliError::Config("simulate.dims: at least one view is required".into()));
    }
    if !(sim.noise_std >= 0.0 && sim.noise_std.is_finite()) {
        return Err(CliError::Config(format!("simulate.noise_std: must be finite and >= 0, got {}", sim.noise_std)));
    }
    let cfg = rc.model_config(&sim.dims)?;
    create_dir(&args.out)?;

    let data = match sim.source {
        SimulationSource::Planted => {
            let structure = planted_structure(&cfg, &sim)?;
            let (data, truth) = make_synthetic(&cfg, &structure, sim.n, rc.seed)?;
            write_json(&args.out.join("truth.json"), &truth)?;
            data
        }
        SimulationSource::Prior => {
            if sim.noise_std <= 0.0 {
                return Err(CliError::Config("simulate.noise_std: the prior source needs noise_std > 0".into()));
            }
            let mut params = DiccaParams::init(&cfg, rc.seed)?;
            let log_var = 2.0 * sim.noise_std.ln();
            params.log_psi.iter_mut().flatten().for_each(|l| *l = log_var);
            let sample = sample_generative(&cfg, &params, sim.n, rc.seed, true)?;
            save_model(&sample.params, &cfg, args.out.join("generating_model.dicca"))
                .map_err(|e| CliError::Other(e.to_string()))?;
            let mask = mask_from_params(&sample.params, 0.0);
            write_json(&args.out.join("truth.json"), &PriorTruth { mask, gamma_sq: &sample.gamma_sq })?;
            sample.dataset
        }
    };
    let manifest = write_dataset(&args.out, &data)?;
    println!("wrote {} samples in {} views to {}", data.n_samples(), data.n_views(), manifest.display());
    Ok(())
}

pub struct Mnist2ViewArgs {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub subset: Option<usize>,
    pub max_angle_deg: f64,
    pub noise: f64,
}

pub fn mnist2view(args: &Mnist2ViewArgs) -> CliResult<()> {
    let images = match load_idx(&args.images).map_err(CliError::from_data)? {
        IdxData::Images { images, .. } => images,
        IdxData::Labels(_) => {
            return Err(CliError::Data(format!("{}: expected an image idx file, found labels", args.images.display())))
        }
    };
    let labels = match load_idx(&args.labels).map_err(CliError::from_data)? {
        IdxData::Labels(l) => l,
        IdxData::Images { .. } => {
            return Err(CliError::Data(format!("{}: expected a label idx file, found images", args.labels.display())))
        }
    };
    if labels.len() != images.rows() {
        return Err(CliError::Data(format!("{} labels for {} images", labels.len(), images.rows())));
    }
    let n = match args.subset {
        Some(0) => return Err(CliError::Config("--subset must be >= 1".into())),
        Some(s) => s.min(images.rows()),
        None => images.rows(),
    };
    let images = Matrix::from_fn(n, images.cols(), |r, c| images[(r, c)]);
    let options = NoisyTwoViewOptions { max_angle: args.max_angle_deg.to_radians(), noise_amplitude: args.noise };
    let data = make_noisy_two_view_with(&images, &labels[..n], args.seed, options)?
        .with_names(vec!["rotated".into(), "noisy".into()])?;
    let manifest = write_dataset(&args.out, &data)?;
    println!("wrote {n} two-view samples to {}", manifest.display());
    Ok(())
}

pub struct FitArgs {
    pub data: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lambda: Option<f64>,
    pub disable_private: bool,
    pub lambda_zero: bool,
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let mut rc = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        rc.seed = s;
    }
    if let Some(e) = args.epochs {
        rc.train.epochs = e;
    }
    if let Some(l) = args.lambda {
        rc.model.lambda = l;
    }
    rc.ablation.disable_private |= args.disable_private;
    rc.ablation.lambda_zero |= args.lambda_zero;

    let manifest = args
        .data
        .clone()
        .or_else(|| rc.data.manifest.clone())
        .ok_or_else(|| CliError::Config("no dataset given (pass --data or set [data].manifest)".into()))?;
    let data = load_data(&manifest)?;
    let cfg = rc.model_config(&data.dims())?;
    let opts = rc.train_options()?;

    let (params, report) = train(&data, &cfg, &opts)?;

    create_dir(&args.out)?;
    let model_path = args.out.join("model.dicca");
    save_model(&params, &cfg, &model_path).map_err(|e| CliError::Other(e.to_string()))?;
    write_json(&args.out.join("report.json"), &report)?;
    rc.data.manifest = Some(manifest);
    let resolved = toml::to_string(&rc).map_err(|e| CliError::Other(e.to_string()))?;
    write_text(&args.out.join("config.toml"), &resolved)?;

    if let Some(last) = report.epochs.last() {
        let p = &last.parts;
        println!("epoch {}: elbo/sample {:.6}", last.epoch, last.elbo_per_sample);
        println!(
            "  recon {:?}  kl_shared {:.6}  kl_private {:?}  penalty {:.6}",
            p.recon,
            p.kl_shared,
            p.kl_private,
            p.penalty_shared + p.penalty_private
        );
    }
    for (m, z) in report.final_zero_columns.iter().enumerate() {
        println!(
            "  {}: zero shared columns {}/{}, zero private columns {}/{}",
            data.meta.view_names[m], z.shared, z.shared_total, z.private, z.private_total
        );
    }
    println!("wrote {}", model_path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    R2,
    Heatmap,
    Support,
}

impl Metric {
    pub fn parse_list(text: &str) -> CliResult<Vec<Metric>> {
        let mut out = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m = match item {
                "mse" => Metric::Mse,
                "r2" => Metric::R2,
                "heatmap" => Metric::Heatmap,
                "support" => Metric::Support,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown metric {other:?} (expected mse, r2, heatmap, support)"
                    )))
                }
            };
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(CliError::Config("--metrics lists nothing".into()));
        }
        Ok(out)
    }
}

/// Permutations of `0..k` in lexicographic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).expect("a larger element exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Largest shared latent count for which every relabelling is tried.
const MAX_ALIGNED_K: usize = 8;

/// F1 after relabelling the estimated shared latents to best match the truth;
/// `None` when there are too many latents to search.
pub fn aligned_support_f1(estimated: &SupportMask, truth: &SupportMask) -> CliResult<Option<f64>> {
    let k = estimated.shared.first().map_or(0, Vec::len);
    if k > MAX_ALIGNED_K {
        return Ok(None);
    }
    let mut best = support_f1(estimated, truth)?;
    for perm in permutations(k) {
        best = best.max(support_f1(&estimated.permute_shared(&perm), truth)?);
    }
    Ok(Some(best))
}

pub struct EvalArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub metrics: String,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let metrics = Metric::parse_list(&args.metrics)?;
    if metrics.contains(&Metric::Support) && args.truth.is_none() {
        return Err(CliError::Config("the support metric needs --truth".into()));
    }
    let (params, cfg) = load_trained(&args.model)?;
    let data = load_data(&args.data)?;
    check_dims(&cfg, &data)?;
    create_dir(&args.out)?;

    let names = &data.meta.view_names;
    let mut lines = Vec::new();
    for metric in metrics {
        match metric {
            Metric::Mse => {
                for (name, v) in names.iter().zip(reconstruction_mse(&cfg, &params, &data, 0)?) {
                    lines.push(format!("mse.{name} = {v:?}"));
                }
            }
            Metric::R2 => {
                for (name, v) in names.iter().zip(variance_explained_r2(&cfg, &params, &data)?) {
                    lines.push(format!("r2.{name} = {v:?}"));
                }
            }
            Metric::Heatmap => {
                let dep = group_dependency(&params);
                let (shared, private) = dep.normalized();
                for (kind, values, prefix) in [("shared", &shared, "z"), ("private", &private, "u")] {
                    let title = format!("{kind} latent dependency");
                    write_text(&args.out.join(format!("heatmap_{kind}.csv")), &heatmap::to_csv(values, names, prefix))?;
                    write_text(
                        &args.out.join(format!("heatmap_{kind}.svg")),
                        &heatmap::to_svg(values, names, prefix, &title),
                    )?;
                }
                lines.push(format!("heatmap.shared_max = {:?}", dep.shared_max));
                lines.push(format!("heatmap.private_max = {:?}", dep.private_max));
            }
            Metric::Support => {
                let path = args.truth.as_ref().expect("checked above");
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
                let truth: TruthFile =
                    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                let estimated = mask_from_params(&params, 0.0);
                lines.push(format!("support_f1 = {:?}", support_f1(&estimated, &truth.mask)?));
                if let Some(best) = aligned_support_f1(&estimated, &truth.mask)? {
                    lines.push(format!("support_f1_aligned = {best:?}"));
                }
            }
        }
    }
    let mut text = lines.join("\n");
    text.push('\n');
    write_text(&args.out.join("metrics.txt"), &text)?;
    print!("{text}");
    Ok(())
}

/// Which posterior `transform` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Shared,
    /// 0-based view.
    Private(usize),
}

impl Which {
    /// `shared` or `private:<view>` with a 1-based view.
    pub fn parse(text: &str) -> CliResult<Self> {
        if text == "shared" {
            return Ok(Which::Shared);
        }
        match text.strip_prefix("private:").map(str::parse::<usize>) {
            Some(Ok(m)) if m >= 1 => Ok(Which::Private(m - 1)),
            _ => Err(CliError::Config(format!("--which {text:?}: expected shared or private:<view>, view from 1"))),
        }
    }
}

pub struct TransformArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub which: String,
}

pub fn transform(args: &TransformArgs) -> CliResult<()> {
    let which = Which::parse(&args.which)?;
    let (params, cfg) = load_trained(&args.model)?;
    let data = load_data(&args.data)?;
    check_dims(&cfg, &data)?;
    if let Which::Private(m) = which {
        if m >= cfg.views() {
            return Err(CliError::Shape(format!("private:{} but the model has {} views", m + 1, cfg.views())));
        }
        if cfg.k_private[m] == 0 {
            return Err(CliError::Shape(format!("the model has no private latents for view {}", m + 1)));
        }
    }
    let (shared, privates) = encode(&cfg, &params, data.views())?;
    let (means, prefix) = match which {
        Which::Shared => (shared.mean(), "z".to_string()),
        Which::Private(m) => (privates[m].mean(), format!("u{}_", m + 1)),
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_csv_view(&args.out, means, Some(&numbered(&prefix, means.cols())))
        .map_err(|e| CliError::Other(e.to_string()))?;
    println!("wrote {} x {} posterior means to {}", means.rows(), means.cols(), args.out.display());
    Ok(())
}
