use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kbp_commit::analysis::{self, render_table2, render_table2_records, SpecId};
use kbp_commit::checker::{check, validate_atoms};
use kbp_commit::refinement::{builtin_candidates, parse_candidates, refine_loop};
use kbp_commit::{generator, parse, trace, Config, Error, Policy};

#[derive(Parser)]
#[command(name = "kbp-commit", version, about = "Two-phase commit knowledge-based programs: generate, check, refine, bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the interpreted system and write its trace.
    Generate(Common),
    /// Check a formula at the initial point of every run.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "formula_file", required_unless_present = "formula_file")]
        formula: Option<String>,
        #[arg(long)]
        formula_file: Option<PathBuf>,
    },
    /// Check the specification battery.
    Suite {
        #[command(flatten)]
        common: Common,
        /// Exit nonzero unless the row is (fails, holds, fails, fails, fails, holds, holds).
        #[arg(long)]
        expect_paper: bool,
    },
    /// Check candidate predicates against their knowledge tests.
    Refine {
        #[command(flatten)]
        common: Common,
        /// Candidate file; the built-in predicates when omitted.
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Search the shortest and longest termination bounds.
    Bounds(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Never,
    Nondet,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Policy {
        match p {
            PolicyArg::Never => Policy::Never,
            PolicyArg::Nondet => Policy::Nondeterministic,
        }
    }
}

#[derive(Args)]
struct Common {
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum)]
    byzantine: Option<PolicyArg>,
    #[arg(long, value_enum)]
    trap: Option<PolicyArg>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Generate with lossy start messages.
    #[arg(long)]
    lossy: bool,
    /// Output directory for reports and traces.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<Config, Error> {
        let mut c = match &self.config {
            Some(p) => Config::default().apply_text(&fs::read_to_string(p)?)?,
            None => Config::default(),
        };
        if let Some(d) = self.d {
            c.d = d;
        }
        if let Some(b) = self.byzantine {
            c.byzantine_policy = b.into();
        }
        if let Some(t) = self.trap {
            c.trap_policy = t.into();
        }
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        if self.lossy {
            c.reliable_channels = false;
        }
        c.validate()?;
        Ok(c)
    }

    fn setup(&self) -> Result<(Config, Output), Error> {
        if let Some(j) = self.jobs {
            // Only fails if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
        }
        let config = self.config()?;
        let out = Output::new(self.out.as_deref())?;
        Ok((config, out))
    }
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn new(dir: Option<&Path>) -> Result<Output, Error> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Output { dir: dir.map(Path::to_path_buf) })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Error> {
        if let Some(d) = &self.dir {
            fs::write(d.join(name), contents)?;
        }
        Ok(())
    }
}

fn header(command: &str, config: &Config) -> String {
    format!("# kbp-commit {} command={command} {config}\n", env!("CARGO_PKG_VERSION"))
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Generate(common) => {
            let (config, out) = common.setup()?;
            let sys = kbp_commit::generate(&config)?;
            let stats = generator::stats(&sys);
            let head = header("generate", &config);
            out.write("system.trace", &(head.clone() + &trace::render_system(&sys)))?;
            out.write("stats.txt", &format!("{head}{stats}\n"))?;
            println!("{head}{stats}");
            Ok(true)
        }
        Command::Check { common, formula, formula_file } => {
            let (config, out) = common.setup()?;
            let text = match (formula, formula_file) {
                (Some(f), _) => f,
                (None, Some(p)) => fs::read_to_string(p)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let f = parse(text.trim())?;
            let sys = kbp_commit::generate(&config)?;
            validate_atoms(&sys, &f)?;
            let v = check(&sys, &f)?;
            let head = header("check", &config);
            out.write("verdict.trace", &(head.clone() + &v.render()))?;
            println!("{head}{}", v.header());
            Ok(v.holds)
        }
        Command::Suite { common, expect_paper } => {
            let (config, out) = common.setup()?;
            let sys = kbp_commit::generate(&config)?;
            let row = analysis::run_table2(&sys)?;
            let head = header("suite", &config);
            let table = render_table2(config.d, &row);
            out.write("table2.txt", &(head.clone() + &table))?;
            out.write("table2.records", &render_table2_records(config.d, &row))?;
            for (id, v) in &row {
                if !v.holds {
                    out.write(&format!("counterexample-{id}.trace"), &v.render())?;
                }
            }
            print!("{head}{table}");
            let matches = row.iter().all(|(id, v)| v.holds == id.expected());
            if expect_paper {
                let expected: Vec<&str> = SpecId::ALL
                    .iter()
                    .map(|id| if id.expected() { "holds" } else { "fails" })
                    .collect();
                println!("expected: {}", expected.join(" "));
                println!("match: {matches}");
                return Ok(matches);
            }
            Ok(true)
        }
        Command::Refine { common, candidates } => {
            let (config, out) = common.setup()?;
            let cands = match candidates {
                Some(p) => parse_candidates(&fs::read_to_string(p)?)?,
                None => builtin_candidates(config.d),
            };
            let sys = kbp_commit::generate(&config)?;
            let report = refine_loop(&sys, &cands)?;
            let head = header("refine", &config);
            let body = report.render();
            out.write("refine.report", &(head.clone() + &body))?;
            for (name, vs) in &report.results {
                for (n, v) in vs.iter().filter(|(_, v)| !v.holds) {
                    out.write(&format!("counterexample-{name}-{n}.trace"), &v.render())?;
                }
            }
            print!("{head}{body}");
            println!("all_pass: {}", report.all_pass());
            Ok(report.all_pass())
        }
        Command::Bounds(common) => {
            let (config, out) = common.setup()?;
            let sys = kbp_commit::generate(&config)?;
            let b = analysis::bounds(&sys)?;
            let head = header("bounds", &config);
            out.write("bounds.txt", &(head.clone() + &b.render()))?;
            out.write("bounds.records", &b.record())?;
            out.write("shortest.trace", &b.shortest_witness.render())?;
            out.write("longest.trace", &b.longest_witness.render())?;
            print!("{head}{}", b.render());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(2)
        }
    }
}
