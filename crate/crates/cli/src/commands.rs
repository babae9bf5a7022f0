use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use qfeat::ansatz::{count_report, AnsatzSpec, CountReport, ModelKind};
use qfeat::cla::{
    acls_check, closed_form_derivative_1d, closed_form_fidelity_1d, product_encoding, selective_direction_count, AclsVerdict, ClaMap,
    RankPolicy, VectorSampler,
};
use qfeat::data::{gen_hypersphere, load_csv, minmax_scale, save_csv, CsvSchema, Dataset, HypersphereConfig, MinMaxScaler, Split};
use qfeat::model::Checkpoint;
use qfeat::quantum::{fidelity_weight_derivative, fidelity, Generator, Pauli, PauliString, StateVector};
use qfeat::train::{evaluate as evaluate_model, run_once, Evaluation, ExperimentSummary, Metrics};
use qfeat::verify::{one_qubit_state, run_suite};
use serde::Serialize;

use crate::config::{DataSource, RunConfig};
use crate::{CountsArgs, DiagnoseArgs, EvaluateArgs, FidelityScanArgs, GenDataArgs, TrainArgs, VerifyArgs};

/// Marker error for a failed invariant suite (exit status 2).
#[derive(Debug)]
pub struct VerifyFailed(pub usize);

impl std::fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} verification check(s) failed", self.0)
    }
}

impl std::error::Error for VerifyFailed {}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_histogram(name: &str, data: &Dataset) {
    let parts: Vec<String> = data.class_histogram().iter().map(|(k, v)| format!("{k}:{v}")).collect();
    println!("{name:<5} {:>7} rows  classes {{{}}}", data.len(), parts.join(", "));
}

pub fn gen_data(out: &Path, args: GenDataArgs) -> Result<()> {
    let dir = args.dir.clone().unwrap_or_else(|| out.join("data").join(&args.scenario));
    let (train, val, test) = if args.scenario == "csv" {
        let input = args.input.as_ref().context("the csv scenario needs --input")?;
        let schema = CsvSchema {
            label_column: args.label_column.clone(),
            n_classes: None,
        };
        split_csv(&load_csv(input, &schema, Split::Other)?, &args)?
    } else {
        let mut cfg = HypersphereConfig::scenario(&args.scenario, args.seed)?;
        cfg.n_train = args.n_train.unwrap_or(cfg.n_train);
        cfg.n_val = args.n_val.unwrap_or(cfg.n_val);
        cfg.n_test = args.n_test.unwrap_or(cfg.n_test);
        gen_hypersphere(&cfg)?
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, data) in [("train", &train), ("val", &val), ("test", &test)] {
        save_csv(dir.join(format!("{name}.csv")), data).with_context(|| format!("writing {name}.csv"))?;
        print_histogram(name, data);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

/// Splits rows in file order: `n_train`, then `n_val`, the rest is test.
/// Without explicit sizes the split is 60/20/20.
fn split_csv(data: &Dataset, args: &GenDataArgs) -> Result<(Dataset, Dataset, Dataset)> {
    let n = data.len();
    let n_train = args.n_train.unwrap_or(n * 3 / 5);
    let n_val = args.n_val.unwrap_or(n / 5);
    ensure!(n_train > 0 && n_val > 0 && n_train + n_val < n, "cannot split {n} rows into {n_train}/{n_val}/rest");
    let part = |range: std::ops::Range<usize>, split: Split| Dataset {
        features: data.features[range.clone()].to_vec(),
        labels: data.labels[range].to_vec(),
        n_classes: data.n_classes,
        split,
    };
    Ok((
        part(0..n_train, Split::Train),
        part(n_train..n_train + n_val, Split::Val),
        part(n_train + n_val..n, Split::Test),
    ))
}

fn resolve_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($field:expr, $flag:expr) => {
            if let Some(v) = $flag.clone() {
                $field = v;
            }
        };
    }
    set!(cfg.experiment, args.experiment);
    set!(cfg.model, args.model);
    set!(cfg.qubits, args.qubits);
    set!(cfg.layers, args.layers);
    set!(cfg.psi0_seed, args.psi0_seed);
    set!(cfg.train.lr, args.lr);
    set!(cfg.train.lr_decay_factor, args.lr_decay);
    set!(cfg.train.lr_patience, args.lr_patience);
    set!(cfg.train.early_stop_patience, args.early_stop);
    set!(cfg.train.max_epochs, args.max_epochs);
    set!(cfg.train.batch_size, args.batch_size);
    set!(cfg.train.n_runs, args.runs);
    set!(cfg.train.seed, args.seed);
    if args.d_inp.is_some() {
        cfg.d_inp = args.d_inp;
    }
    if args.d_out.is_some() {
        cfg.d_out = args.d_out;
    }
    if let Some(dir) = &args.data_dir {
        cfg.data = DataSource::Csv {
            dir: dir.clone(),
            label_column: "label".into(),
            n_classes: None,
            scale: true,
        };
    }
    if let Some(name) = &args.scenario {
        let seed = match &cfg.data {
            DataSource::Scenario { seed, .. } => *seed,
            DataSource::Csv { .. } => 7,
        };
        cfg.data = DataSource::Scenario {
            name: name.clone(),
            seed,
            n_train: None,
            n_val: None,
            n_test: None,
        };
    }
    match &mut cfg.data {
        DataSource::Scenario {
            seed,
            n_train,
            n_val,
            n_test,
            ..
        } => {
            set!(*seed, args.data_seed);
            if args.n_train.is_some() {
                *n_train = args.n_train;
            }
            if args.n_val.is_some() {
                *n_val = args.n_val;
            }
            if args.n_test.is_some() {
                *n_test = args.n_test;
            }
        }
        DataSource::Csv {
            label_column,
            n_classes,
            scale,
            ..
        } => {
            set!(*label_column, args.label_column);
            if args.n_classes.is_some() {
                *n_classes = args.n_classes;
            }
            if args.no_scale {
                *scale = false;
            }
        }
    }
    Ok(cfg)
}

fn load_splits(cfg: &RunConfig) -> Result<([Dataset; 3], Option<MinMaxScaler>)> {
    match &cfg.data {
        DataSource::Scenario {
            name,
            seed,
            n_train,
            n_val,
            n_test,
        } => {
            let mut h = HypersphereConfig::scenario(name, *seed)?;
            h.n_train = n_train.unwrap_or(h.n_train);
            h.n_val = n_val.unwrap_or(h.n_val);
            h.n_test = n_test.unwrap_or(h.n_test);
            let (a, b, c) = gen_hypersphere(&h)?;
            Ok(([a, b, c], None))
        }
        DataSource::Csv {
            dir,
            label_column,
            n_classes,
            scale,
        } => {
            let schema = CsvSchema {
                label_column: label_column.clone(),
                n_classes: *n_classes,
            };
            let load = |name: &str, split| -> Result<Dataset> {
                let path = dir.join(format!("{name}.csv"));
                load_csv(&path, &schema, split).with_context(|| format!("loading {}", path.display()))
            };
            let (train, val, test) = (load("train", Split::Train)?, load("val", Split::Val)?, load("test", Split::Test)?);
            let classes = train.n_classes.max(val.n_classes).max(test.n_classes);
            let [mut train, mut val, mut test] = [train, val, test];
            for d in [&mut train, &mut val, &mut test] {
                d.n_classes = classes;
            }
            if *scale {
                let (train, others, scaler) = minmax_scale(&train, &[&val, &test])?;
                let [val, test]: [Dataset; 2] = others.try_into().expect("two splits");
                Ok(([train, val, test], Some(scaler)))
            } else {
                Ok(([train, val, test], None))
            }
        }
    }
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    training: &'a Metrics,
    test: &'a Evaluation,
}

pub fn train(out: &Path, args: TrainArgs) -> Result<()> {
    let cfg = resolve_config(&args)?;
    cfg.train.validate()?;
    ensure!(!cfg.experiment.is_empty(), "experiment name must not be empty");
    if let (Some(d_inp), Some(d_out)) = (cfg.d_inp, cfg.d_out) {
        AnsatzSpec::new(cfg.model, cfg.qubits, d_inp, d_out, cfg.layers)?;
    } else if let Some(d_inp) = cfg.d_inp {
        count_report(cfg.model, cfg.qubits, d_inp, cfg.layers)?;
    }

    let (splits, scaler) = load_splits(&cfg)?;
    let d_inp = splits[0].d_inp();
    if let Some(expected) = cfg.d_inp {
        ensure!(expected == d_inp, "data has {d_inp} features but d_inp = {expected}");
    }
    let n_classes = splits[0].n_classes;
    ensure!(n_classes >= 2, "training data needs at least two classes");
    let d_out = cfg.d_out.unwrap_or(if n_classes == 2 { 1 } else { n_classes });
    let spec = AnsatzSpec::new(cfg.model, cfg.qubits, d_inp, d_out, cfg.layers)?;

    let root = out.join(&cfg.experiment);
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    write_json(&root.join("config.json"), &cfg)?;
    if let Some(s) = &scaler {
        write_json(&root.join("scaler.json"), s)?;
    }
    for (name, d) in ["train", "val", "test"].iter().zip(&splits) {
        print_histogram(name, d);
    }

    let refs = [&splits[0], &splits[1], &splits[2]];
    let mut outcomes = Vec::with_capacity(cfg.train.n_runs);
    for run in 0..cfg.train.n_runs {
        let outcome = run_once(&spec, cfg.psi0_seed, refs, &cfg.train, run).with_context(|| format!("run {run}"))?;
        let dir = root.join(format!("run-{run}"));
        fs::create_dir_all(&dir)?;
        let checkpoint = Checkpoint::from_model(&outcome.model, outcome.metrics.best_epoch, outcome.metrics.best_val_loss);
        write_json(&dir.join("checkpoint.json"), &checkpoint)?;
        write_json(
            &dir.join("metrics.json"),
            &RunMetrics {
                training: &outcome.metrics,
                test: &outcome.test,
            },
        )?;
        log::info!(
            "run {run}: {} epochs, best epoch {}, test AUC {:.4}",
            outcome.metrics.history.len(),
            outcome.metrics.best_epoch,
            outcome.test.roc_auc.mean()
        );
        outcomes.push(outcome);
    }
    let summary = ExperimentSummary::from_runs(&spec, &outcomes)?;
    write_json(&root.join("summary.json"), &summary)?;
    println!("{}", summary.table_row());
    println!("wrote {}", root.display());
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.checkpoint).with_context(|| format!("reading {}", args.checkpoint.display()))?;
    let checkpoint: Checkpoint = serde_json::from_str(&text).context("parsing checkpoint")?;
    let model = checkpoint.into_model()?;
    let d_out = model.spec().d_out;
    let schema = CsvSchema {
        label_column: args.label_column.clone(),
        n_classes: Some(if d_out == 1 { 2 } else { d_out }),
    };
    let mut data = load_csv(&args.data, &schema, Split::Test)?;
    if let Some(path) = &args.scaler {
        let scaler: MinMaxScaler = serde_json::from_str(&fs::read_to_string(path)?).context("parsing scaler")?;
        data = scaler.transform(&data)?;
    }
    let report = evaluate_model(&model, &data)?;
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(path) = &args.output {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct BlockDiagnosis {
    layer: Option<usize>,
    block: String,
    #[serde(flatten)]
    verdict: AclsVerdict,
    selective_directions: usize,
    product_encoding: bool,
    direction_cap: usize,
    cap_exceeded: bool,
}

fn diagnose_map(map: &ClaMap, layer: Option<usize>, block: &str, args: &DiagnoseArgs) -> Result<BlockDiagnosis> {
    let x = VectorSampler::Uniform {
        dim: map.d_inp,
        low: args.x_low,
        high: args.x_high,
    };
    let w = VectorSampler::Normal {
        dim: map.d_w_total,
        std: args.w_std,
    };
    let verdict = acls_check(map, &x, &w, args.samples, args.seed, RankPolicy::Relative)?;
    let count = selective_direction_count(map);
    let product = product_encoding(map);
    let cap = 3 * map.n_qubits;
    Ok(BlockDiagnosis {
        layer,
        block: block.to_string(),
        verdict,
        selective_directions: count,
        product_encoding: product,
        direction_cap: cap,
        cap_exceeded: product && count > cap,
    })
}

pub fn diagnose(args: DiagnoseArgs) -> Result<()> {
    ensure!(args.x_low < args.x_high, "--x-low must be below --x-high");
    let mut blocks = Vec::new();
    let spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text).context("malformed spec file")?;
            if value.get("generators").is_some() {
                let map: ClaMap = serde_json::from_value(value).context("malformed CLA map")?;
                blocks.push(diagnose_map(&map, None, "map", &args)?);
                None
            } else {
                Some(serde_json::from_value::<AnsatzSpec>(value).context("malformed ansatz spec")?)
            }
        }
        None => {
            let d_inp = if args.model == ModelKind::Pdr { args.qubits } else { args.d_inp };
            Some(AnsatzSpec::new(args.model, args.qubits, d_inp, 1, args.layers)?)
        }
    };
    if let Some(spec) = spec {
        for l in 0..spec.n_layers {
            blocks.push(diagnose_map(&spec.encoder_map(l)?, Some(l), "encoder", &args)?);
            blocks.push(diagnose_map(&spec.bias_map(l)?, Some(l), "bias", &args)?);
        }
    }
    let text = serde_json::to_string_pretty(&blocks)?;
    println!("{text}");
    if let Some(path) = &args.output {
        write_json(path, &blocks)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CountsTable {
    acls: CountReport,
    pdr: CountReport,
    gate_ratio: f64,
    weight_ratio: f64,
}

pub fn counts(args: CountsArgs) -> Result<()> {
    let acls = count_report(ModelKind::Acls, args.qubits, args.d_inp, args.layers)?;
    let pdr = count_report(ModelKind::Pdr, args.d_inp, args.d_inp, args.layers)?;
    let table = CountsTable {
        gate_ratio: acls.gates_per_layer as f64 / pdr.gates_per_layer as f64,
        weight_ratio: acls.weights_per_layer as f64 / pdr.weights_per_layer as f64,
        acls,
        pdr,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&table)?);
        return Ok(());
    }
    println!("model  n   d_inp  k_SE  gates/layer  weights/layer  total gates  circuit weights  readout");
    for r in [&table.acls, &table.pdr] {
        println!(
            "{:<6} {:<3} {:<6} {:<5} {:<12} {:<14} {:<12} {:<16} {}",
            format!("{:?}", r.kind).to_lowercase(),
            r.n_qubits,
            r.d_inp,
            r.k_se,
            r.gates_per_layer,
            r.weights_per_layer,
            r.total_gates,
            r.total_circuit_weights,
            r.readout_weights
        );
    }
    println!(
        "gate ratio   G_t/G_p     = {}/{} = {:.3}",
        table.acls.gates_per_layer, table.pdr.gates_per_layer, table.gate_ratio
    );
    println!(
        "weight ratio d_w,t/d_w,p = {}/{} = {:.3}",
        table.acls.weights_per_layer, table.pdr.weights_per_layer, table.weight_ratio
    );
    Ok(())
}

pub fn fidelity_scan(out: &Path, args: FidelityScanArgs) -> Result<()> {
    ensure!(args.grid >= 2, "--grid must be at least 2");
    let dir = args.dir.clone().unwrap_or_else(|| out.join("fidelity-scan"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let axis: Vec<f64> = (0..args.grid)
        .map(|i| -PI + 2.0 * PI * i as f64 / (args.grid - 1) as f64)
        .collect();
    let sx: Generator = PauliString::single(1, 0, Pauli::X)?.into();
    let sz: Generator = PauliString::single(1, 0, Pauli::Z)?.into();
    for (label, x2) in [("0", 0.0), ("pi4", PI / 4.0), ("pi2", PI / 2.0)] {
        let mut text = String::from("x1,w,fidelity_closed,fidelity_sim,derivative_closed,derivative_sim\n");
        let (mut fid_err, mut der_err, mut der_max) = (0.0f64, 0.0f64, 0.0f64);
        let p2 = StateVector::zero(1).rotated(&sx, x2)?;
        for &x1 in &axis {
            let p1 = StateVector::zero(1).rotated(&sx, x1)?;
            for &w in &axis {
                let fc = closed_form_fidelity_1d(x1, x2, w);
                let fs = fidelity(&one_qubit_state(x1, w)?, &one_qubit_state(x2, w)?)?;
                let dc = closed_form_derivative_1d(x1, x2, w);
                let ds = fidelity_weight_derivative(&p1, &p2, &sz, w * (x1 - x2), x1 - x2)?;
                fid_err = fid_err.max((fc - fs).abs());
                der_err = der_err.max((dc - ds).abs());
                der_max = der_max.max(ds.abs());
                writeln!(text, "{x1:?},{w:?},{fc:?},{fs:?},{dc:?},{ds:?}")?;
            }
        }
        let path = dir.join(format!("x2_{label}.csv"));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "x2 = {x2:.4}: max |ΔF| {fid_err:.2e}, max |Δ∂F/∂w| {der_err:.2e}, max |∂F/∂w| {der_max:.3e} -> {}",
            path.display()
        );
    }
    Ok(())
}

pub fn verify(args: VerifyArgs) -> Result<()> {
    let results = run_suite(args.seed)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&results)?);
    } else {
        for r in &results {
            let status = if r.passed { "PASS" } else { "FAIL" };
            println!("{status}  {:<45} worst {:.3e} (tolerance {:.1e})", r.name, r.worst, r.tolerance);
        }
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        bail!(VerifyFailed(failed));
    }
    Ok(())
}

