//! Command-line interface. Every subcommand is a thin shell over one library
//! call; all numeric output is printed with six decimal places and metric
//! tables are TSV.
//!
//! Exit codes: 0 success, 1 validation/parse/usage error, 2 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{cell_detection_prf, relation_f1, Prf};
use crate::gt::unify_boxes;
use crate::io::{read_json, read_xml, write_json, write_xml};
use crate::loss::{alignment_loss, alignment_loss_grad};
use crate::markup::{bleu, to_markup};
use crate::model::{AdjacencyMatrices, CellBox, TableAnnotation};
use crate::structure::{adjacency_to_spans, spans_to_adjacency};
use crate::synth::generate;
use crate::tree::{table_to_tree, teds};

#[derive(Parser)]
#[command(
    name = "tsr",
    about = "Table structure recognition toolkit",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover spans from adjacency matrices and write the table XML.
    Postprocess {
        /// Input cell JSON; must carry row/col adjacency matrices.
        #[arg(long)]
        cells: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score a prediction against ground truth, printing TSV rows.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// IoU threshold for cell matching.
        #[arg(long, default_value_t = 0.6)]
        iou: f64,
        #[arg(long, value_enum, default_value_t = EvalMode::Relations)]
        mode: EvalMode,
        /// Comma-separated thresholds; one output row each.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
    },
    /// Print the alignment-loss breakdown of a table.
    AlignLoss {
        #[arg(long)]
        cells: PathBuf,
        /// Also print per-cell gradients.
        #[arg(long)]
        grad: bool,
    },
    /// Align ground-truth boxes (content level to cell level).
    Unify {
        #[arg(long)]
        gt: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a synthetic table with spans and adjacency matrices.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0.0)]
        merge_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        empty_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the markup token string of a table.
    Markup {
        #[arg(long)]
        cells: PathBuf,
    },
    /// BLEU between the markup of two tables.
    Bleu {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// TEDS between the structure trees of two tables.
    Teds {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Include cell content in the tree labels.
        #[arg(long)]
        content: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Relations,
    Cells,
}

/// Loads a table from `.json` (canonical cells) or `.xml`.
fn load_table(path: &Path) -> Result<(TableAnnotation, Option<AdjacencyMatrices>)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => read_json(path),
        Some(ext) if ext.eq_ignore_ascii_case("xml") => Ok((read_xml(path)?, None)),
        _ => Err(Error::parse(
            path.display().to_string(),
            "unsupported extension, expected .json or .xml",
        )),
    }
}

fn print_prf_header() {
    println!("threshold\tprecision\trecall\tf1\ttp\tfp\tfn");
}

fn print_prf_row(threshold: f64, prf: &Prf) {
    println!(
        "{threshold:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}",
        prf.precision, prf.recall, prf.f1, prf.true_pos, prf.false_pos, prf.false_neg
    );
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Postprocess { cells, output } => {
            let (table, adjacency) = load_table(&cells)?;
            let adjacency = adjacency.ok_or_else(|| {
                Error::parse(
                    cells.display().to_string(),
                    "postprocess requires row_adjacency and col_adjacency",
                )
            })?;
            let bare: Vec<CellBox> = table
                .cells
                .into_iter()
                .map(|c| CellBox { spans: None, ..c })
                .collect();
            let spanned = adjacency_to_spans(&bare, &adjacency)?;
            write_xml(output, &spanned)
        }
        Command::Evaluate {
            pred,
            gt,
            iou,
            mode,
            sweep,
        } => {
            let (pred, _) = load_table(&pred)?;
            let (gt, _) = load_table(&gt)?;
            let thresholds = sweep.unwrap_or_else(|| vec![iou]);
            print_prf_header();
            for threshold in thresholds {
                // Cell detection works on bare boxes; only relation scoring
                // needs span indices.
                let prf = match mode {
                    EvalMode::Relations => relation_f1(&pred, &gt, threshold)?,
                    EvalMode::Cells => cell_detection_prf(&pred, &gt, threshold),
                };
                print_prf_row(threshold, &prf);
            }
            Ok(())
        }
        Command::AlignLoss { cells, grad } => {
            let (table, _) = load_table(&cells)?;
            let breakdown = alignment_loss(&table)?;
            println!("l1\tl2\tl3\tl4\ttotal");
            println!(
                "{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                breakdown.l1, breakdown.l2, breakdown.l3, breakdown.l4, breakdown.total
            );
            if grad {
                let grads = alignment_loss_grad(&table)?;
                println!("cell\tdx1\tdy1\tdx2\tdy2");
                for (cell, g) in table.cells.iter().zip(grads) {
                    println!(
                        "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                        cell.id, g.x1, g.y1, g.x2, g.y2
                    );
                }
            }
            Ok(())
        }
        Command::Unify { gt, output } => {
            let (table, _) = load_table(&gt)?;
            let unified = unify_boxes(&table)?;
            write_xml(output, &unified)
        }
        Command::Synth {
            seed,
            rows,
            cols,
            merge_prob,
            empty_prob,
            jitter,
            output,
        } => {
            let table = generate(seed, rows, cols, merge_prob, empty_prob, jitter)?;
            let adjacency = spans_to_adjacency(&table)?;
            write_json(output, &table, Some(&adjacency))
        }
        Command::Markup { cells } => {
            let (table, _) = load_table(&cells)?;
            println!("{}", to_markup(&table)?);
            Ok(())
        }
        Command::Bleu { pred, gt } => {
            let (pred, _) = load_table(&pred)?;
            let (gt, _) = load_table(&gt)?;
            let score = bleu(&to_markup(&pred)?, &to_markup(&gt)?, 4)?;
            println!("{score:.6}");
            Ok(())
        }
        Command::Teds { pred, gt, content } => {
            let (pred, _) = load_table(&pred)?;
            let (gt, _) = load_table(&gt)?;
            let score = teds(
                &table_to_tree(&pred, content)?,
                &table_to_tree(&gt, content)?,
            )?;
            println!("{score:.6}");
            Ok(())
        }
    }
}

/// Runs the CLI on the given arguments and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    0
                }
                _ => {
                    eprint!("{err}");
                    1
                }
            }
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io { .. } => 2,
                _ => 1,
            }
        }
    }
}
