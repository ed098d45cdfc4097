use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dan::bench::bench_attention_scaling;
use dan::config::RunConfig;
use dan::dataset::write_dataset;
use dan::eval::{eval_dataset, write_csv, Interpolator};
use dan::pgm::{read_pgm_file, write_pgm_file};
use dan::train::train_from_config;
use dan::verify::Suite;
use dan_core::attention::Scheme;
use dan_core::image::make_synthetic_triplet;

#[derive(Parser)]
#[command(name = "dan", version, about = "Frame interpolation with long/short-range attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a `key = value` configuration file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Stop after this many optimizer steps in total.
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Synthesize the frame between two frames.
    Interp {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        prev: PathBuf,
        #[arg(long)]
        next: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count attention multiply-adds over position counts and fit exponents.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "4096,32768,262144")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        channels: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "dense,interlaced,dal")]
        schemes: Vec<Scheme>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the self-checks, printing one JSON object per check.
    Verify {
        #[arg(long)]
        filter: Option<String>,
    },
    /// Score a checkpoint and the frame-average baseline on a dataset.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Write a dataset of synthetic translation triplets.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 4)]
        max_shift: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Train { config, max_steps } => {
            let cfg = RunConfig::load(&config)?;
            let report = train_from_config(&cfg, max_steps, |s| {
                eprintln!("epoch {} step {} loss {:.6e} lr {:e}", s.epoch, s.step, s.loss, s.lr)
            })?;
            println!("{}", report.final_checkpoint.display());
        }
        Command::Interp { ckpt, prev, next, out } => {
            let interp = Interpolator::load(&ckpt)?;
            let frame = interp.interpolate(&read_pgm_file(&prev)?, &read_pgm_file(&next)?)?;
            write_pgm_file(&out, &frame)?;
        }
        Command::Bench {
            sizes,
            channels,
            k,
            schemes,
            csv,
            seed,
        } => {
            let report = bench_attention_scaling(&schemes, &sizes, channels, k, seed)?;
            for (scheme, n, why) in &report.skipped {
                eprintln!("skipped {scheme} at {n}: {why}");
            }
            print!("{}", report.to_csv());
            print!("{}", report.fit_csv());
            if let Some(path) = csv {
                std::fs::write(&path, report.to_csv())?;
                std::fs::write(path.with_extension("fit.csv"), report.fit_csv())?;
            }
        }
        Command::Verify { filter } => {
            let ok = Suite::default().report(filter.as_deref(), &mut std::io::stdout().lock())?;
            return Ok(ok);
        }
        Command::Eval { ckpt, data, csv } => {
            let interp = Interpolator::load(&ckpt)?;
            let report = eval_dataset(&interp, &data)?;
            write_csv(&report, &csv)?;
            if let Some((m, b)) = report.mean() {
                println!(
                    "model psnr {:.4} ssim {:.4} ie {:.4} | baseline psnr {:.4} ssim {:.4} ie {:.4}",
                    m.psnr, m.ssim, m.ie, b.psnr, b.ssim, b.ie
                );
            }
            return Ok(report.failures() == 0);
        }
        Command::Synth {
            out,
            count,
            width,
            height,
            max_shift,
            seed,
        } => {
            let items = (0..count)
                .map(|i| Ok((format!("s{i:04}"), make_synthetic_triplet(width, height, seed + i as u64, max_shift)?)))
                .collect::<Result<Vec<_>, dan_core::Error>>()?;
            write_dataset(&out, &items)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
