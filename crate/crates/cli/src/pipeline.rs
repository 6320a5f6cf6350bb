//! synth → complete → invert, with artifact rendering.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};

use maxinv_core::completion::{complete_difference_data, QrOperator};
use maxinv_core::fem::factorization_count;
use maxinv_core::forward::{add_noise, synthesize_dataset, SynthesisInput};
use maxinv_core::inversion::{
    locate_peaks, relative_errors, ErrorRow, InversionProblem, PeakSet, ReconstructionResult,
};
use maxinv_core::mesh::Mesh2D;
use maxinv_core::sensitivity::BackgroundSolver;
use maxinv_core::Error;

use crate::config::{ExperimentConfig, Stage};
use crate::io::{CompletedFile, DatasetFile};

/// Factorizations spent on one kind of system matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorizationRecord {
    pub system: String,
    pub matrices: usize,
    pub factorizations: usize,
}

/// Timings and instrumentation; written to `run.log` only.
#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub lines: Vec<String>,
    pub factorizations: Vec<FactorizationRecord>,
}

impl RunLog {
    fn note(&mut self, msg: String) {
        info!("{msg}");
        self.lines.push(msg);
    }

    fn timed<T>(&mut self, what: &str, f: impl FnOnce() -> Result<T, Error>) -> Result<T, Error> {
        let t = Instant::now();
        let out = f()?;
        self.note(format!("{what}: {:.3} s", t.elapsed().as_secs_f64()));
        Ok(out)
    }

    fn count<T>(&mut self, system: &str, matrices: usize, f: impl FnOnce() -> Result<T, Error>) -> Result<T, Error> {
        let before = factorization_count();
        let out = self.timed(system, f)?;
        let factorizations = factorization_count() - before;
        self.note(format!("{system}: {factorizations} factorization(s) for {matrices} system matrix(es)"));
        self.factorizations.push(FactorizationRecord {
            system: system.to_string(),
            matrices,
            factorizations,
        });
        Ok(out)
    }

    pub fn to_text(&self, checksum: &str) -> String {
        let mut s = format!("# maxinv run log\n# config-sha256 {checksum}\n");
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }
}

fn require_truth(cfg: &ExperimentConfig) -> Result<&crate::config::Truth, Error> {
    cfg.truth
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("truth: synth requires a ground truth".into()))
}

/// Forward solves on the data mesh, plus noise on the measured total field.
pub fn cmd_synth(cfg: &ExperimentConfig, amplitude: Option<f64>, log: &mut RunLog) -> Result<DatasetFile, Error> {
    cfg.validate()?;
    let truth = require_truth(cfg)?;
    let amplitude = amplitude.unwrap_or(truth.amplitude);
    let input = SynthesisInput {
        geometry: cfg.geometry.clone(),
        medium: cfg.medium,
        h: cfg.meshes.h_data,
        support: truth.support.clone(),
        amplitude,
        waves: cfg.waves.build()?,
        sampling: cfg.sampling,
    };
    let mut dataset = log.count("data mesh: background and perturbed operators", 2, || {
        synthesize_dataset(&input)
    })?;
    if cfg.noise.eta > 0.0 {
        dataset.gamma0_total = add_noise(&dataset.gamma0_total, cfg.noise.eta, cfg.noise.seed)?;
        log.note(format!("noise eta = {} with seed {}", cfg.noise.eta, cfg.noise.seed));
    }
    Ok(DatasetFile {
        config_checksum: cfg.checksum(),
        seed: cfg.noise.seed,
        eta: cfg.noise.eta,
        amplitude,
        dataset,
    })
}

/// Built once and reused for every dataset of a sweep.
pub struct Completer {
    op: Option<QrOperator>,
}

impl Completer {
    pub fn new(cfg: &ExperimentConfig, log: &mut RunLog) -> Result<Completer, Error> {
        if cfg.skip_completion {
            return Ok(Completer { op: None });
        }
        let op = log.timed("ring mesh and quasi-reversibility operator", || {
            let ring = Arc::new(cfg.geometry.ring_mesh(cfg.meshes.h_v)?);
            QrOperator::assemble(ring, &cfg.medium, "Gamma0", cfg.qr.scaled)
        })?;
        Ok(Completer { op: Some(op) })
    }

    pub fn complete(&self, cfg: &ExperimentConfig, data: &DatasetFile, log: &mut RunLog) -> Result<CompletedFile, Error> {
        let checksum = cfg.checksum();
        if data.config_checksum != checksum {
            warn!("dataset was produced by another configuration ({})", data.config_checksum);
        }
        let Some(op) = &self.op else {
            log.note("completion skipped: exact interior traces".into());
            return Ok(CompletedFile {
                config_checksum: checksum,
                source: "exact".into(),
                qr_delta: cfg.qr.delta,
                qr_max_iters: cfg.qr.max_iters,
                qr_scaled: cfg.qr.scaled,
                iterations: Vec::new(),
                final_residuals: Vec::new(),
                traces: data.dataset.interior_delta.clone(),
            });
        };
        let delta = data.dataset.gamma0_delta()?;
        let (traces, states) = log.count("quasi-reversibility normal operator", 1, || {
            complete_difference_data(op, &delta, &cfg.qr, &cfg.geometry.interior_tag())
        })?;
        let increases: usize = states.iter().map(|s| s.residual_increases).sum();
        if increases > 0 {
            warn!("quasi-reversibility residual increased {increases} time(s)");
        }
        Ok(CompletedFile {
            config_checksum: checksum,
            source: "qr".into(),
            qr_delta: cfg.qr.delta,
            qr_max_iters: cfg.qr.max_iters,
            qr_scaled: cfg.qr.scaled,
            iterations: states.iter().map(|s| s.iterations).collect(),
            final_residuals: states
                .iter()
                .map(|s| s.residual_history.last().copied().unwrap_or(0.0))
                .collect(),
            traces,
        })
    }
}

pub fn cmd_complete(cfg: &ExperimentConfig, data: &DatasetFile, log: &mut RunLog) -> Result<CompletedFile, Error> {
    cfg.validate()?;
    Completer::new(cfg, log)?.complete(cfg, data, log)
}

/// One optimization stage with its re-evaluated cost.
#[derive(Clone, Debug, PartialEq)]
pub struct StageOutcome {
    pub result: ReconstructionResult,
    pub recheck: f64,
    pub errors: Vec<ErrorRow>,
}

#[derive(Clone, Debug)]
pub struct InversionOutput {
    pub peaks: PeakSet,
    pub stages: Vec<StageOutcome>,
    pub mesh: Arc<Mesh2D>,
    /// `κ` of the last stage per triangle.
    pub kappa: Vec<num_complex::Complex64>,
    pub evaluations: usize,
}

impl InversionOutput {
    pub fn last(&self) -> &StageOutcome {
        self.stages.last().expect("at least one stage")
    }
}

/// Background solver on the inverse mesh; built once per run or sweep.
pub fn background(cfg: &ExperimentConfig, log: &mut RunLog) -> Result<BackgroundSolver, Error> {
    log.count("inverse mesh: background operator", 1, || {
        let mesh = Arc::new(cfg.geometry.disk_mesh(cfg.meshes.h_inverse)?);
        BackgroundSolver::new(mesh, &cfg.medium, &cfg.waves.build()?)
    })
}

pub fn invert_with(
    cfg: &ExperimentConfig,
    bg: &BackgroundSolver,
    traces: &CompletedFile,
    amplitude: Option<f64>,
    log: &mut RunLog,
) -> Result<InversionOutput, Error> {
    let params = &cfg.inversion.params;
    let before = factorization_count();
    let prob = InversionProblem::new(bg, &traces.traces, &cfg.geometry, params)?;
    let peaks = locate_peaks(prob.data(), params.peak_threshold)?;
    log.note(format!(
        "{} peak(s) at angles {:?}",
        peaks.len(),
        peaks.peaks.iter().map(|p| p.angle()).collect::<Vec<_>>()
    ));
    let mut stages: Vec<StageOutcome> = Vec::new();
    let mut ball: Option<ReconstructionResult> = None;
    for stage in &cfg.inversion.stages {
        let peak = &peaks.peaks[0];
        let result = log.timed(&format!("stage {stage:?}"), || match stage {
            Stage::Ball => prob.reconstruct_ball(peak),
            Stage::Ellipse => prob.reconstruct_ellipse(peak, ball.as_ref()),
            Stage::Multi => prob.reconstruct_multi(&peaks.peaks),
            Stage::Fourier => {
                let init = if cfg.inversion.fourier_cold_start { None } else { ball.as_ref() };
                prob.refine_fourier(peak, init)
            }
        })?;
        if *stage == Stage::Ball {
            ball = Some(result.clone());
        }
        let recheck = prob.recheck(&result)?;
        let errors = match &cfg.truth {
            Some(t) => relative_errors(&result, &t.support, amplitude.unwrap_or(t.amplitude), cfg.geometry.r_int),
            None => Vec::new(),
        };
        stages.push(StageOutcome { result, recheck, errors });
    }
    let spent = factorization_count() - before;
    log.note(format!(
        "inversion: {} cost evaluations, {spent} additional factorization(s)",
        prob.evaluations()
    ));
    if let Some(r) = log.factorizations.iter_mut().rev().find(|r| r.system.starts_with("inverse mesh")) {
        r.factorizations += spent;
    }
    let last = &stages.last().expect("stages validated non-empty").result;
    let kappa = prob.field(last).values().to_vec();
    Ok(InversionOutput {
        peaks,
        stages,
        mesh: bg.space().mesh().clone(),
        kappa,
        evaluations: prob.evaluations(),
    })
}

pub fn cmd_invert(cfg: &ExperimentConfig, traces: &CompletedFile, log: &mut RunLog) -> Result<InversionOutput, Error> {
    cfg.validate()?;
    if traces.config_checksum != cfg.checksum() {
        warn!("traces were produced by another configuration ({})", traces.config_checksum);
    }
    let bg = background(cfg, log)?;
    invert_with(cfg, &bg, traces, None, log)
}

/// Every artifact of one run as text.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub amplitude: Option<f64>,
    pub dataset: Option<DatasetFile>,
    pub completed: CompletedFile,
    pub output: InversionOutput,
    pub peaks_text: String,
    pub result_text: String,
    pub field_text: String,
}

impl RunArtifacts {
    pub fn files(&self) -> Vec<(&'static str, String)> {
        let mut f = Vec::new();
        if let Some(d) = &self.dataset {
            f.push(("dataset.txt", d.to_text()));
        }
        f.push(("completed.txt", self.completed.to_text()));
        f.push(("peaks.txt", self.peaks_text.clone()));
        f.push(("result.txt", self.result_text.clone()));
        f.push(("field.txt", self.field_text.clone()));
        f
    }
}

/// Result of `pipeline`: one run, or one per sweep amplitude.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub checksum: String,
    pub runs: Vec<RunArtifacts>,
    pub sweep_text: Option<String>,
    pub log: RunLog,
}

impl PipelineReport {
    pub fn sweep_rows(&self) -> Vec<SweepRow> {
        sweep_rows(&self.runs)
    }
}

pub fn cmd_pipeline(cfg: &ExperimentConfig) -> Result<PipelineReport, Error> {
    cfg.validate()?;
    require_truth(cfg)?;
    let checksum = cfg.checksum();
    let mut log = RunLog::default();
    log.note(format!("config {} ({})", cfg.name, checksum));
    log.note(format!("noise seed {}", cfg.noise.seed));
    let completer = Completer::new(cfg, &mut log)?;
    let bg = background(cfg, &mut log)?;
    let amplitudes: Vec<Option<f64>> = if cfg.sweep.is_empty() {
        vec![None]
    } else {
        cfg.sweep.iter().map(|&a| Some(a)).collect()
    };
    let mut runs = Vec::new();
    for a in amplitudes {
        if let Some(a) = a {
            log.note(format!("sweep amplitude {a}"));
        }
        let data = cmd_synth(cfg, a, &mut log)?;
        let completed = completer.complete(cfg, &data, &mut log)?;
        let output = invert_with(cfg, &bg, &completed, a, &mut log)?;
        runs.push(render(cfg, &checksum, Some(data), completed, output, a));
    }
    let sweep_text = (!cfg.sweep.is_empty()).then(|| render_sweep(&checksum, &sweep_rows(&runs)));
    Ok(PipelineReport {
        checksum,
        runs,
        sweep_text,
        log,
    })
}

/// Builds the text artifacts of one run.
pub fn render(
    cfg: &ExperimentConfig,
    checksum: &str,
    dataset: Option<DatasetFile>,
    completed: CompletedFile,
    output: InversionOutput,
    amplitude: Option<f64>,
) -> RunArtifacts {
    RunArtifacts {
        amplitude,
        peaks_text: render_peaks(checksum, &output.peaks),
        result_text: render_result(cfg, checksum, &completed, &output),
        field_text: render_field(checksum, &output),
        dataset,
        completed,
        output,
    }
}

fn render_peaks(checksum: &str, peaks: &PeakSet) -> String {
    let mut s = format!("# maxinv peaks\n# config-sha256 {checksum}\n");
    writeln!(s, "# columns: angle x y normal_x normal_y height").unwrap();
    for p in &peaks.peaks {
        writeln!(
            s,
            "{:e} {:e} {:e} {:e} {:e} {:e}",
            p.angle(),
            p.point[0],
            p.point[1],
            p.normal[0],
            p.normal[1],
            p.height
        )
        .unwrap();
    }
    writeln!(s, "# smoothed indicator per interior curve sample").unwrap();
    for v in &peaks.indicator {
        writeln!(s, "# {v:e}").unwrap();
    }
    s
}

fn render_result(cfg: &ExperimentConfig, checksum: &str, completed: &CompletedFile, out: &InversionOutput) -> String {
    let mut s = format!("# maxinv result\n# config-sha256 {checksum}\n");
    writeln!(s, "# traces {} ({} waves)", completed.source, completed.traces.num_waves()).unwrap();
    writeln!(s, "# config").unwrap();
    for l in cfg.to_json().lines() {
        writeln!(s, "#   {l}").unwrap();
    }
    writeln!(s, "peaks {}", out.peaks.len()).unwrap();
    for st in &out.stages {
        let r = &st.result;
        writeln!(s, "\nstage {}", r.stage).unwrap();
        writeln!(s, "support {}", serde_json::to_string(&r.support).expect("support serializes")).unwrap();
        writeln!(s, "amplitude {:e}", r.amplitude).unwrap();
        writeln!(s, "cost {:e}", r.cost).unwrap();
        writeln!(s, "cost_recheck {:e}", st.recheck).unwrap();
        writeln!(s, "parameters {}", join(&r.params)).unwrap();
        writeln!(s, "depths {}", join(&r.depths)).unwrap();
        writeln!(s, "taylor_order {}", r.taylor_order).unwrap();
        writeln!(s, "evaluations {}", r.evaluations).unwrap();
        writeln!(s, "cost_history {}", join(&r.trace)).unwrap();
        if !st.errors.is_empty() {
            writeln!(s, "{:<12} {:>34} {:>34} {:>14}", "parameter", "exact", "approximation", "rel_error").unwrap();
            for e in &st.errors {
                writeln!(
                    s,
                    "{:<12} {:>34} {:>34} {:>14.6e}",
                    e.name,
                    join_short(&e.exact),
                    join_short(&e.approx),
                    e.rel_error
                )
                .unwrap();
            }
        }
    }
    s
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

fn join_short(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    if parts.len() == 1 {
        parts[0].clone()
    } else {
        format!("({})", parts.join(", "))
    }
}

fn render_field(checksum: &str, out: &InversionOutput) -> String {
    let mut s = format!("# maxinv field\n# config-sha256 {checksum}\n");
    writeln!(s, "# columns: centroid_x centroid_y re_kappa im_kappa").unwrap();
    for (t, k) in out.kappa.iter().enumerate() {
        let c = out.mesh.centroid(t);
        writeln!(s, "{:e} {:e} {:e} {:e}", c[0], c[1], k.re, k.im).unwrap();
    }
    s
}

/// One amplitude of a sweep, from the last stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub exact: f64,
    pub amplitude: f64,
    pub rel_error: f64,
    pub depth: f64,
    pub radius: f64,
}

fn sweep_rows(runs: &[RunArtifacts]) -> Vec<SweepRow> {
    runs.iter()
        .filter_map(|r| {
            let a_ex = r.amplitude?;
            let res = &r.output.last().result;
            let radius = match &res.support {
                maxinv_core::support::Support::Ball { r, .. } => *r,
                _ => f64::NAN,
            };
            Some(SweepRow {
                exact: a_ex,
                amplitude: res.amplitude,
                rel_error: (res.amplitude - a_ex).abs() / a_ex.abs(),
                depth: res.depths[0],
                radius,
            })
        })
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn render_sweep(checksum: &str, rows: &[SweepRow]) -> String {
    let mut s = format!("# maxinv sweep\n# config-sha256 {checksum}\n");
    writeln!(s, "{:>10} {:>14} {:>12} {:>10} {:>10}", "a_exact", "a_approx", "rel_error", "depth", "radius").unwrap();
    for r in rows {
        writeln!(
            s,
            "{:>10.4} {:>14.8} {:>12.6} {:>10.6} {:>10.6}",
            r.exact, r.amplitude, r.rel_error, r.depth, r.radius
        )
        .unwrap();
    }
    let (m, sd) = mean_std(&rows.iter().map(|r| r.rel_error).collect::<Vec<_>>());
    let (_, sd_d) = mean_std(&rows.iter().map(|r| r.depth).collect::<Vec<_>>());
    let (_, sd_r) = mean_std(&rows.iter().map(|r| r.radius).collect::<Vec<_>>());
    writeln!(s, "mean_amplitude_rel_error {m:.6}").unwrap();
    writeln!(s, "std_amplitude_rel_error {sd:.6}").unwrap();
    writeln!(s, "std_depth {sd_d:.6e}").unwrap();
    writeln!(s, "std_radius {sd_r:.6e}").unwrap();
    s
}
