//! The `seqtag` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::{
    curve_table, default_sizes, evaluate, freq_bin_report, freq_bin_table, learning_curve, noise_curve, summarize,
    summary_table, CsvTable, CurvePoint, SystemSpec, Tagger, DEFAULT_RATES,
};
use crate::container;
use crate::corpus::{read_corpus, write_corpus, Corpus, Format, Sentence, Split};
use crate::error::{Error, Result};
use crate::recurrent::CellKind;
use crate::repr::ReprMode;
use crate::tagger::{self, Hyperparams, TaggerModel};
use crate::tnt::{self, TntConfig, TrigramModel};

#[derive(Parser, Debug)]
#[command(name = "seqtag", version, about = "Bi-LSTM and trigram HMM part-of-speech taggers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write it to MODEL_OUT.
    Train {
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long, default_value = "conllu")]
        format: FormatArg,
        /// Report accuracy on this file after every epoch.
        #[arg(long)]
        dev: Option<PathBuf>,
        train: PathBuf,
        model_out: PathBuf,
    },
    /// Tag INPUT, writing it back with predicted tags.
    Tag {
        #[arg(long)]
        beam: Option<f64>,
        #[arg(long, default_value = "conllu")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
        model: PathBuf,
        input: PathBuf,
    },
    /// Score a model on a gold-tagged file; prints a JSON report.
    Eval {
        #[arg(long)]
        beam: Option<f64>,
        #[arg(long, default_value = "conllu")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
        model: PathBuf,
        test: PathBuf,
    },
    /// Accuracy against the number of training sentences.
    Curve {
        #[command(flatten)]
        grid: GridOpts,
        /// Comma-separated sentence counts; defaults to 100,500,1000,2000,5000 and the full set.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
    },
    /// Accuracy against the share of corrupted training labels.
    Noise {
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
    },
    /// Per-frequency-bin accuracy difference between two models.
    Freqbins {
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, default_value = "conllu")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
        model_a: PathBuf,
        model_b: PathBuf,
        test: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Bilstm,
    Tnt,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CellArg {
    Lstm,
    Rnn,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Conllu,
    Twocol,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Conllu => Format::Conllu,
            FormatArg::Twocol => Format::Twocol,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ModelOpts {
    #[arg(long, default_value = "bilstm")]
    model: ModelArg,
    #[command(flatten)]
    hp: HyperOpts,
}

#[derive(Args, Debug, Clone)]
struct HyperOpts {
    #[arg(long, default_value = "wc")]
    rep: ReprMode,
    #[arg(long)]
    freqbin: bool,
    /// Pre-trained word vectors: text, one `token v1 v2 ...` row per line.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    #[arg(long, default_value_t = 128)]
    word_dim: usize,
    #[arg(long, default_value_t = 100)]
    char_dim: usize,
    #[arg(long, default_value = "lstm")]
    cell: CellArg,
    /// Beam factor for the HMM; 0 decodes exactly.
    #[arg(long, default_value_t = 1000.0)]
    beam: f64,
}

impl HyperOpts {
    fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            lr: self.lr,
            epochs: self.epochs,
            sigma: self.sigma,
            word_dim: self.word_dim,
            subtoken_dim: self.char_dim,
            hidden_dim: self.hidden,
            seed: self.seed,
            repr: self.rep,
            freqbin: self.freqbin,
            pretrained: self.embeddings.clone(),
            cell: match self.cell {
                CellArg::Lstm => CellKind::Lstm,
                CellArg::Rnn => CellKind::SimpleRnn,
            },
            ..Hyperparams::default()
        }
    }

    fn tnt_config(&self) -> TntConfig {
        TntConfig { beam: self.beam, ..TntConfig::default() }
    }
}

#[derive(Args, Debug, Clone)]
struct GridOpts {
    /// Systems to compare.
    #[arg(long, value_delimiter = ',', default_value = "bilstm,tnt")]
    systems: Vec<ModelArg>,
    #[command(flatten)]
    hp: HyperOpts,
    /// Repeat with seeds seed, seed+1, ... and also write mean and sd.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Add a wall-clock seconds column.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = "conllu")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
    train: PathBuf,
    dev: PathBuf,
}

/// Runs the tool and returns its exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path, format: FormatArg) -> Result<Corpus> {
    Ok(read_corpus(path, format.into(), Split::from_path(path))?)
}

/// Opens either kind of model file; `beam` only affects the HMM.
fn load_model(path: &Path, beam: Option<f64>) -> Result<Box<dyn Tagger>> {
    let bytes = container::read_bytes(path)?;
    match container::peek_kind(&bytes)?.as_str() {
        tnt::KIND => {
            let m = TrigramModel::from_bytes(&bytes)?;
            Ok(Box::new(match beam {
                Some(b) => m.with_beam(b)?,
                None => m,
            }))
        }
        _ => Ok(Box::new(TaggerModel::from_bytes(&bytes)?)),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_table(table: &CsvTable, path: Option<&Path>) -> Result<()> {
    table.write_to(output(path)?)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train { model, format, dev, train, model_out } => {
            let corpus = read(&train, format)?;
            match model.model {
                ModelArg::Bilstm => {
                    let dev = dev.map(|d| read(&d, format)).transpose()?;
                    let (m, _) = tagger::train(&corpus, &model.hp.hyperparams(), dev.as_ref())?;
                    m.save(&model_out)
                }
                ModelArg::Tnt => tnt::train_hmm(&corpus, &model.hp.tnt_config())?.save(&model_out),
            }
        }
        Command::Tag { beam, format, out, model, input } => {
            let m = load_model(&model, beam)?;
            let corpus = read(&input, format)?;
            let tagged = corpus
                .sentences()
                .iter()
                .map(|s| {
                    let mut t = Sentence::new(s.forms.clone(), m.as_ref().tag(&s.forms)?);
                    t.source = s.source.clone();
                    Ok(t)
                })
                .collect::<Result<Vec<_>>>()?;
            let tagged = Corpus::new(tagged, corpus.split(), corpus.language());
            let mut w = output(out.as_deref())?;
            write_corpus(&tagged, format.into(), &mut w).map_err(|e| Error::io("<output>", e))?;
            w.flush().map_err(|e| Error::io("<output>", e))
        }
        Command::Eval { beam, format, out, model, test } => {
            let m = load_model(&model, beam)?;
            let report = evaluate(m.as_ref(), &read(&test, format)?)?;
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Error::Config(e.to_string()))?;
            writeln!(w).map_err(|e| Error::io("<output>", e))
        }
        Command::Curve { grid, sizes } => {
            let train = read(&grid.train, grid.format)?;
            let sizes = if sizes.is_empty() { default_sizes(train.len()) } else { sizes };
            run_grid_command(&grid, &train, "sentences", |train, dev, systems, seed| {
                learning_curve(train, dev, &sizes, systems, seed)
            })
        }
        Command::Noise { grid, rates } => {
            let train = read(&grid.train, grid.format)?;
            let rates = if rates.is_empty() { DEFAULT_RATES.to_vec() } else { rates };
            run_grid_command(&grid, &train, "noise_rate", |train, dev, systems, seed| {
                noise_curve(train, dev, &rates, systems, seed)
            })
        }
        Command::Freqbins { bins, format, out, model_a, model_b, test } => {
            let a = load_model(&model_a, None)?;
            let b = load_model(&model_b, None)?;
            let test_corpus = read(&test, format)?;
            let n_bins = match bins {
                Some(n) => n,
                None => {
                    let max = test_corpus.sentences().iter().flat_map(|s| &s.forms).map(|f| a.as_ref().train_freq(f)).max();
                    1 + (((1 + max.unwrap_or(0)) as f64).ln() as usize)
                }
            };
            let rows = freq_bin_report(a.as_ref(), b.as_ref(), &test_corpus, n_bins)?;
            let comments = vec![
                format!("a={}", model_a.display()),
                format!("b={}", model_b.display()),
                format!("test={}", test.display()),
                format!("bins={n_bins}"),
            ];
            write_table(&freq_bin_table(&rows, comments), out.as_deref())
        }
    }
}

fn run_grid_command<F>(grid: &GridOpts, train: &Corpus, x_name: &str, f: F) -> Result<()>
where
    F: Fn(&Corpus, &Corpus, &[SystemSpec], u64) -> Result<Vec<CurvePoint>>,
{
    if grid.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let dev = read(&grid.dev, grid.format)?;
    let systems: Vec<SystemSpec> = grid
        .systems
        .iter()
        .map(|s| match s {
            ModelArg::Bilstm => SystemSpec::bilstm(grid.hp.hyperparams()),
            ModelArg::Tnt => SystemSpec::tnt(grid.hp.tnt_config()),
        })
        .collect();
    let mut comments = vec![
        format!("train={}", grid.train.display()),
        format!("dev={}", grid.dev.display()),
        format!("seed={}", grid.hp.seed),
        format!("seeds={}", grid.seeds),
    ];
    for s in &systems {
        comments.push(serde_json::to_string(s).map_err(|e| Error::Config(e.to_string()))?);
    }
    let mut points = Vec::new();
    for k in 0..grid.seeds {
        let seed = grid.hp.seed + k;
        let seeded: Vec<SystemSpec> = systems.iter().cloned().map(|s| s.with_seed(seed)).collect();
        points.extend(f(train, &dev, &seeded, seed)?);
    }
    write_table(&curve_table(x_name, &points, comments.clone(), grid.timing), grid.out.as_deref())?;
    if grid.seeds > 1 {
        let table = summary_table(x_name, &summarize(&points), comments);
        match &grid.out {
            Some(p) => write_table(&table, Some(&summary_path(p))),
            None => {
                println!();
                write_table(&table, None)
            }
        }
    } else {
        Ok(())
    }
}

/// `results.csv` -> `results.summary.csv`.
fn summary_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}.summary.csv"))
}
