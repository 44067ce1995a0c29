//! Protocol dispatch: turns a validated config into CSV artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use uirs_core::channels::{
    build_ising, depolarizing, evolve, otoc_exact, unitarity_exact, unitary_channel, Channel,
    NoiseModel,
};
use uirs_core::circuit::{sample_shadows, write_records, SequenceSpec, ShadowRecord};
use uirs_core::correlators::{
    baseline_statistical_otoc, khat_identical_unitarity, otoc_ratio_streaming, OutcomeWeights,
};
use uirs_core::error::{Error, Result};
use uirs_core::fitting::fit_offset_decay;
use uirs_core::oracles::{oracle_suite, OtocObservables};
use uirs_core::pauli::DenseOperator;

use crate::config::{ExperimentConfig, Protocol};

pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub rows: usize,
}

struct RecordSink {
    writer: BufWriter<File>,
}

impl RecordSink {
    fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            writer: BufWriter::new(File::create(path)?),
        })
    }

    fn write(&mut self, records: &[ShadowRecord]) -> Result<()> {
        write_records(&mut self.writer, records)
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn noise_model(config: &ExperimentConfig, spam_override: Option<f64>) -> Result<NoiseModel> {
    let n = config.n;
    let spam_prep = spam_override.unwrap_or(config.noise.spam_prep);
    let spam_meas = spam_override.unwrap_or(config.noise.spam_meas);
    Ok(NoiseModel {
        left: depolarizing(config.noise.gate_left, n)?,
        right: depolarizing(config.noise.gate_right, n)?,
        spam_prep: depolarizing(spam_prep, n)?,
        spam_meas: depolarizing(spam_meas, n)?,
    })
}

fn evolution(config: &ExperimentConfig, t: f64) -> Result<DenseOperator> {
    let h = build_ising(&config.ising_params())?;
    evolve(&h, t)
}

fn observables(config: &ExperimentConfig) -> Result<OtocObservables> {
    OtocObservables::new(config.observable_v()?, config.observable_w()?)
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: format!("cannot open output: {e}"),
    })?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// Execute one configured experiment; returns the CSV summary.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    match config.protocol {
        Protocol::OracleCheck => {
            let failures = run_oracle_check(&mut std::io::stdout())?;
            if failures > 0 {
                return Err(Error::SimulationIntegrity(format!(
                    "{failures} oracle assertion(s) failed"
                )));
            }
            Ok(RunOutcome {
                csv_path: PathBuf::new(),
                rows: 0,
            })
        }
        Protocol::OtocConverge => run_otoc_converge(config),
        Protocol::OtocVsTime => run_otoc_vs_time(config),
        Protocol::SpamCompare => run_spam_compare(config),
        Protocol::Unitarity => run_unitarity(config),
    }
}

/// Print one pass/fail line per theory assertion; returns the failure count.
pub fn run_oracle_check(out: &mut dyn Write) -> Result<usize> {
    let mut failures = 0;
    for check in oracle_suite() {
        match (check.run)() {
            Ok(()) => writeln!(out, "ok   {}", check.name)?,
            Err(msg) => {
                failures += 1;
                writeln!(out, "FAIL {}: {msg}", check.name)?;
            }
        }
    }
    Ok(failures)
}

fn otoc_specs(
    config: &ExperimentConfig,
    u_t: &DenseOperator,
    spam_override: Option<f64>,
) -> Result<(SequenceSpec, SequenceSpec)> {
    let interleave = unitary_channel(u_t)?;
    let spec1 = SequenceSpec::computational(
        config.n,
        1,
        Some(interleave.clone()),
        noise_model(config, spam_override)?,
    )?;
    let spec2 = spec1.with_m(2)?;
    Ok((spec1, spec2))
}

fn run_otoc_converge(config: &ExperimentConfig) -> Result<RunOutcome> {
    let u_t = evolution(config, config.t)?;
    let obs = observables(config)?;
    let exact = otoc_exact(&u_t, obs.v(), obs.w())?;
    let (spec1, spec2) = otoc_specs(config, &u_t, None)?;
    let mut sink = config
        .records_path
        .as_deref()
        .map(RecordSink::open)
        .transpose()?;
    let mut offset = 0u64;
    let mut rows = Vec::new();
    for s in config.sweep_s_list() {
        let mut sink_fn = sink
            .as_mut()
            .map(|w| move |recs: &[ShadowRecord]| w.write(recs));
        let (estimate, next) = otoc_ratio_streaming(
            &spec1,
            &spec2,
            &obs,
            s,
            config.n_batches,
            config.r,
            config.mode,
            config.master_seed,
            offset,
            sink_fn
                .as_mut()
                .map(|f| f as &mut dyn FnMut(&[ShadowRecord]) -> Result<()>),
        )?;
        offset = next;
        rows.push(format!("{s},{},{},{exact}", estimate.xbar, estimate.stderr));
    }
    if let Some(s) = sink {
        s.finish()?;
    }
    let path = config.output_path.clone().unwrap();
    write_csv(&path, "S,xbar,stderr,exact", &rows)?;
    Ok(RunOutcome {
        csv_path: path,
        rows: rows.len(),
    })
}

fn run_otoc_vs_time(config: &ExperimentConfig) -> Result<RunOutcome> {
    let obs = observables(config)?;
    let mut sink = config
        .records_path
        .as_deref()
        .map(RecordSink::open)
        .transpose()?;
    let mut offset = 0u64;
    let mut rows = Vec::new();
    for t in config.sweep_t_list() {
        let u_t = evolution(config, t)?;
        let exact = otoc_exact(&u_t, obs.v(), obs.w())?;
        let (spec1, spec2) = otoc_specs(config, &u_t, None)?;
        let mut sink_fn = sink
            .as_mut()
            .map(|w| move |recs: &[ShadowRecord]| w.write(recs));
        let (estimate, next) = otoc_ratio_streaming(
            &spec1,
            &spec2,
            &obs,
            config.s,
            config.n_batches,
            config.r,
            config.mode,
            config.master_seed,
            offset,
            sink_fn
                .as_mut()
                .map(|f| f as &mut dyn FnMut(&[ShadowRecord]) -> Result<()>),
        )?;
        offset = next;
        rows.push(format!("{t},{},{},{exact}", estimate.xbar, estimate.stderr));
    }
    if let Some(s) = sink {
        s.finish()?;
    }
    let path = config.output_path.clone().unwrap();
    write_csv(&path, "t,xbar,stderr,exact", &rows)?;
    Ok(RunOutcome {
        csv_path: path,
        rows: rows.len(),
    })
}

fn run_spam_compare(config: &ExperimentConfig) -> Result<RunOutcome> {
    let u_t = evolution(config, config.t)?;
    let obs = observables(config)?;
    let exact = otoc_exact(&u_t, obs.v(), obs.w())?;
    let mut offset = 0u64;
    let mut rows = Vec::new();
    for p in config.sweep_spam_list() {
        let (spec1, spec2) = otoc_specs(config, &u_t, Some(p))?;
        let (estimate, next) = otoc_ratio_streaming(
            &spec1,
            &spec2,
            &obs,
            config.s,
            config.n_batches,
            config.r,
            config.mode,
            config.master_seed,
            offset,
            None,
        )?;
        offset = next;
        let noise = noise_model(config, Some(p))?;
        let baseline = baseline_statistical_otoc(
            &u_t,
            &obs,
            &noise,
            config.baseline_samples,
            config.master_seed,
        )?;
        rows.push(format!("{p},{},{baseline},{exact}", estimate.xbar));
    }
    let path = config.output_path.clone().unwrap();
    write_csv(&path, "p,uirs,baseline,exact", &rows)?;
    Ok(RunOutcome {
        csv_path: path,
        rows: rows.len(),
    })
}

fn run_unitarity(config: &ExperimentConfig) -> Result<RunOutcome> {
    let weights = OutcomeWeights::z_first_qubit(config.n);
    let mut sink = config
        .records_path
        .as_deref()
        .map(RecordSink::open)
        .transpose()?;
    let mut offset = 0u64;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    let mut u_true = 1.0;
    for m in config.unitarity_m_list() {
        let spec = SequenceSpec::computational(config.n, m, None, noise_model(config, None)?)?;
        u_true = unitarity_exact(&spec.effective_lambda())?;
        let records = sample_shadows(
            &spec,
            config.s,
            config.r,
            config.mode,
            config.master_seed,
            offset,
        )?;
        offset += config.s as u64;
        if let Some(w) = sink.as_mut() {
            w.write(&records)?;
        }
        let (khat, stderr) = khat_identical_unitarity(&records, &weights, config.mode)?;
        points.push((m, khat, stderr.max(1e-12)));
        rows.push(format!("{m},{khat},{stderr}"));
    }
    if let Some(s) = sink {
        s.finish()?;
    }
    let fit = fit_offset_decay(&points)?;
    let path = config.output_path.clone().unwrap();
    write_csv(&path, "m,khat,stderr", &rows)?;
    let fit_path = path.with_file_name("fit.json");
    let fit_json = serde_json::json!({
        "a": fit.a(),
        "b": fit.b().unwrap_or(0.0),
        "u": fit.decay(),
        "residual": fit.residual,
        "unidentifiable": fit.unidentifiable,
        "u_exact": u_true,
    });
    std::fs::write(&fit_path, format!("{:#}\n", fit_json))?;
    Ok(RunOutcome {
        csv_path: path,
        rows: rows.len(),
    })
}

// keep Channel in the public-use surface for doc links
#[allow(unused_imports)]
use Channel as _ChannelDocOnly;
