use anyhow::Result;
use clap::{Args, ValueEnum};
use lrd_core::repr::io::save_sequence;
use lrd_core::repr::synth::{synth_sequence, SynthMode, SynthSpec};

use crate::manifest::RunManifest;
use crate::output::Sink;
use crate::{Global, Outcome};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Identity,
    Rotation,
    Shuffle,
}

impl From<ModeArg> for SynthMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Identity => SynthMode::Identity,
            ModeArg::Rotation => SynthMode::Rotation,
            ModeArg::Shuffle => SynthMode::Shuffle,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Depth L; the file holds L + 1 layers.
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    /// Examples per layer.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Hidden dimension.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Per-layer rotation angle in radians (rotation mode).
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub angle: f64,
    /// File stem; defaults to `synth_<mode>`.
    #[arg(long)]
    pub name: Option<String>,
}

pub fn run(g: &Global, args: &SynthArgs) -> Result<Outcome> {
    let mode = SynthMode::from(args.mode);
    let spec = SynthSpec {
        mode,
        depth: args.depth,
        n: args.n,
        d: args.dim,
        angle: args.angle,
        seed: g.seed.unwrap_or(0),
    };
    let (mut seq, truth) = synth_sequence(&spec)?;
    let name = args
        .name
        .clone()
        .unwrap_or_else(|| format!("synth_{}", args.mode.to_possible_value().unwrap().get_name()));
    seq.set_source_id(&name);

    let manifest = RunManifest::new("synth", g.load_config()?, &g.out)
        .seed("synth_seed", spec.seed)
        .option("spec", serde_json::to_string(&spec)?);
    let mut sink = Sink::open(&g.out, g.format, &manifest)?;
    save_sequence(&seq, g.out.join(format!("{name}.lrdt")))?;
    sink.json(&format!("{name}.truth.json"), &truth)?;
    println!("{}", serde_json::to_string_pretty(&truth)?);
    Ok(Outcome::default())
}
