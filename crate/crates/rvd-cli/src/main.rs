use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rvd_cli::commands::{self, ReportMode};
use rvd_core::dedup::Hyperparameters;
use rvd_core::disclosure::Date;

/// Maintain a robot vulnerability database: schema-validated flaw records,
/// severity scoring, duplicate detection with human-in-the-loop training,
/// status reports, and disclosure-deadline tracking.
#[derive(Parser)]
#[command(name = "rvd", version, max_term_width = 100)]
struct Cli {
    /// Corpus root directory.
    #[arg(long, global = true, env = "RVD_ROOT", default_value = ".")]
    root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate record files (or directories of them) against the schema.
    Validate {
        /// Record files or directories containing them.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Validate a record file and add it to the corpus under a fresh id.
    Add {
        /// Who is making the change; recorded in the corpus journal.
        #[arg(long)]
        author: String,
        /// Record file to add.
        file: PathBuf,
    },
    /// Compute the CVSS v3.1 base score of a vector or a record file.
    Score {
        /// A severity vector string, e.g. "CVSS:3.1/AV:N/AC:L/...".
        #[arg(long, conflicts_with = "file")]
        vector: Option<String>,
        /// A record file whose cvss-vector should be (re)scored.
        file: Option<PathBuf>,
    },
    /// Duplicate detection: scan, label, train, apply.
    Dedup {
        #[command(subcommand)]
        action: DedupAction,
    },
    /// Regenerate the corpus status report (README.md).
    Report {
        /// How unscored records are counted.
        #[arg(long, value_enum, default_value_t = ImputationArg::Both)]
        imputation: ImputationArg,
    },
    /// List disclosure cases and flag any past their 90-day deadline.
    Deadlines {
        /// Evaluate deadlines as of this date instead of today.
        #[arg(long, value_parser = parse_date)]
        today: Option<Date>,
    },
    /// Write a full copy of the corpus to another directory.
    Export {
        /// Target directory.
        target: PathBuf,
    },
}

#[derive(Subcommand)]
enum DedupAction {
    /// List candidate duplicate pairs from the blocking pass.
    Scan {
        /// Compare every pair of records instead of blocked candidates.
        #[arg(long)]
        all_pairs: bool,
    },
    /// Interactively label the most uncertain candidate pairs.
    Label {
        /// How many pairs to queue for labeling.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Name recorded with each label.
        #[arg(long, default_value = "anonymous")]
        labeler: String,
    },
    /// Fit the duplicate classifier from the label log.
    Train {
        #[arg(long, default_value_t = Hyperparameters::default().lambda)]
        lambda: f64,
        #[arg(long, default_value_t = Hyperparameters::default().learning_rate)]
        rate: f64,
        #[arg(long, default_value_t = Hyperparameters::default().epochs)]
        epochs: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cluster duplicates with the trained model and print the clusters.
    Apply {
        /// Probability above which a pair counts as duplicate.
        #[arg(long, default_value_t = rvd_core::dedup::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Compare every pair of records instead of blocked candidates.
        #[arg(long)]
        all_pairs: bool,
        /// Attach a "duplicate" label to non-canonical cluster members.
        #[arg(long)]
        attach: bool,
        /// Who is making the change; recorded when labels are attached.
        #[arg(long, default_value = "anonymous")]
        author: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ImputationArg {
    Pessimistic,
    Optimistic,
    Both,
}

impl From<ImputationArg> for ReportMode {
    fn from(arg: ImputationArg) -> ReportMode {
        match arg {
            ImputationArg::Pessimistic => ReportMode::Pessimistic,
            ImputationArg::Optimistic => ReportMode::Optimistic,
            ImputationArg::Both => ReportMode::Both,
        }
    }
}

fn parse_date(s: &str) -> Result<Date, String> {
    Date::parse_iso(s).map_err(|e| e.to_string())
}

fn today_from_clock() -> Date {
    let days = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| (d.as_secs() / 86_400) as i64)
        .unwrap_or(0);
    Date::from_day_number(days).unwrap_or_else(|_| Date::parse_iso("1970-01-01").unwrap())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out: Box<dyn Write> = Box::new(stdout.lock());
    let mut err: Box<dyn Write> = Box::new(stderr.lock());
    let root = &cli.root;

    let code = match cli.command {
        Command::Validate { paths } => commands::cmd_validate(&paths, &mut out, &mut err),
        Command::Add { author, file } => {
            commands::cmd_add(root, &file, &author, &mut out, &mut err)
        }
        Command::Score { vector, file } => {
            commands::cmd_score(vector.as_deref(), file.as_deref(), &mut out, &mut err)
        }
        Command::Dedup { action } => match action {
            DedupAction::Scan { all_pairs } => {
                commands::cmd_dedup_scan(root, all_pairs, &mut out, &mut err)
            }
            DedupAction::Label { k, labeler } => {
                let stdin = io::stdin();
                let mut input = stdin.lock();
                commands::cmd_dedup_label(root, k, &labeler, &mut input, &mut out, &mut err)
            }
            DedupAction::Train {
                lambda,
                rate,
                epochs,
                seed,
            } => commands::cmd_dedup_train(
                root,
                Hyperparameters {
                    lambda,
                    learning_rate: rate,
                    epochs,
                    seed,
                },
                &mut out,
                &mut err,
            ),
            DedupAction::Apply {
                threshold,
                all_pairs,
                attach,
                author,
            } => commands::cmd_dedup_apply(
                root,
                threshold,
                all_pairs,
                attach.then_some(author.as_str()),
                &mut out,
                &mut err,
            ),
        },
        Command::Report { imputation } => {
            commands::cmd_report(root, imputation.into(), &mut out, &mut err)
        }
        Command::Deadlines { today } => {
            let today = today.unwrap_or_else(today_from_clock);
            commands::cmd_deadlines(root, today, &mut out, &mut err)
        }
        Command::Export { target } => commands::cmd_export(root, &target, &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
