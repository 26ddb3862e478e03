use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use clap::Args;
use lrd_core::repr::io::{load_csv_layers, load_sequence, write_curves_csv, write_series_csv};
use lrd_core::{measure, Measurements, RepresentationSequence};
use rayon::prelude::*;

use super::record_inputs;
use crate::manifest::RunManifest;
use crate::output::Sink;
use crate::{Global, Outcome};

#[derive(Args, Debug)]
pub struct MeasureArgs {
    /// LRDT files, or directories holding one `layer_*.csv` per layer.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

fn load(path: &Path) -> Result<RepresentationSequence> {
    if !path.is_dir() {
        return Ok(load_sequence(path)?);
    }
    let mut layers: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy();
            name.starts_with("layer_") && name.ends_with(".csv")
        })
        .collect();
    if layers.is_empty() {
        bail!("no layer_*.csv files");
    }
    layers.sort();
    let id = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
    Ok(load_csv_layers(&layers, id)?)
}

fn write(sink: &mut Sink, m: &Measurements) -> Result<()> {
    let id = &m.source_id;
    let mut series = vec![&m.speed];
    series.extend(m.curvature.as_ref());
    series.extend([&m.nrs, &m.gfmi]);
    sink.csv(&format!("{id}.series.csv"), |buf| Ok(write_series_csv(buf, &series)?))?;
    sink.csv(&format!("{id}.curves.csv"), |buf| Ok(write_curves_csv(buf, &m.mi_curves)?))?;
    sink.json(&format!("{id}.measurements.json"), m)
}

pub fn run(g: &Global, args: &MeasureArgs) -> Result<Outcome> {
    let mut cfg = g.load_config()?;
    if let Some(seed) = g.seed {
        cfg.anchor_seed = seed;
    }
    let mut manifest = RunManifest::new("measure", cfg.clone(), &g.out).seed("anchor_seed", cfg.anchor_seed);
    record_inputs(&mut manifest, &args.inputs);
    let mut sink = Sink::open(&g.out, g.format, &manifest)?;

    // Files run in parallel; results come back in input order so the
    // reporting and the written bytes do not depend on scheduling.
    let results: Vec<Result<Measurements>> = args
        .inputs
        .par_iter()
        .map(|p| Ok(measure(&load(p)?, &cfg)?))
        .collect();

    let mut outcome = Outcome::default();
    let mut seen = BTreeSet::new();
    for (path, result) in args.inputs.iter().zip(results) {
        let written = result.and_then(|m| {
            if !seen.insert(m.source_id.clone()) {
                return Err(anyhow!("duplicate source id {:?} in batch", m.source_id));
            }
            write(&mut sink, &m)
        });
        if let Err(e) = written {
            outcome.fail(path, &e);
        }
    }
    eprintln!(
        "measured {} of {} input(s) into {}",
        args.inputs.len() - outcome.failures,
        args.inputs.len(),
        g.out.display()
    );
    Ok(outcome)
}
