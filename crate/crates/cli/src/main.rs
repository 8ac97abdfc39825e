use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mapf_repair::bench::{
    measure, read_metrics_csv, read_solution, run_benchmark, summarize, write_metrics_csv,
    write_solution, write_summary_csv, Algorithm, BenchConfig,
};
use mapf_repair::instance::{
    self, read_agents, read_endpoint_pool, write_agents, write_endpoint_pool,
};
use mapf_repair::{generate_wfi_instance, validate_solution, GridMap, Instance, RepairConfig};

#[derive(Parser)]
#[command(
    name = "mapf-repair",
    version,
    about = "Prioritized MAPF by wait-only path repair"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct Motion {
    /// Wait quantum.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Agent radius.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

impl Motion {
    fn config(self) -> Result<RepairConfig> {
        let cfg = RepairConfig {
            delta: self.delta,
            radius: self.radius,
            speed: self.speed,
            ..RepairConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltinMap {
    #[value(name = "empty-64-64")]
    Empty64,
    #[value(name = "warehouse-46-70")]
    Warehouse,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a well-formed instance.
    Gen {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        num_agents: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// CSV of allowed endpoint cells (header x,y).
        #[arg(long)]
        endpoint_pool: Option<PathBuf>,
    },
    /// Plan one instance and write the solution as JSON.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        agents: PathBuf,
        #[arg(long)]
        algo: Algorithm,
        #[command(flatten)]
        motion: Motion,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a solution for collisions and structural errors.
    Validate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        agents: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
    },
    /// Sweep algorithms over generated instances and write one CSV row per run.
    Bench {
        #[arg(long)]
        map: PathBuf,
        /// Comma-separated subset of c-repair, aa-repair, c-sipp, naive.
        #[arg(long, value_delimiter = ',', default_value = "c-repair,c-sipp")]
        algos: Vec<Algorithm>,
        /// Agent counts as start:end:step (end inclusive), or a single count.
        #[arg(long, default_value = "50:250:50")]
        agents_range: String,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        motion: Motion,
        #[arg(long)]
        endpoint_pool: Option<PathBuf>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Per-(algorithm, n) means and median runtime of a benchmark CSV.
    Summary {
        #[arg(long)]
        csv: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one of the bundled maps, plus its rack-face endpoint pool for the warehouse.
    ExportMap {
        #[arg(long)]
        name: BuiltinMap,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        endpoint_pool: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen {
            map,
            num_agents,
            seed,
            out,
            endpoint_pool,
        } => {
            let grid = load_map(&map)?;
            let pool = endpoint_pool.as_deref().map(load_pool).transpose()?;
            let inst = generate_wfi_instance(&grid, num_agents, seed, pool.as_deref())?;
            write_agents(create(&out)?, &inst.agents)?;
        }
        Command::Plan {
            map,
            agents,
            algo,
            motion,
            out,
        } => {
            let cfg = motion.config()?;
            let inst = load_instance(&map, &agents)?;
            let (row, sol) = measure(&map_name(&map), &inst, 0, algo, &cfg)?;
            let Some(sol) = sol else {
                bail!("{algo} found no solution for {}", agents.display());
            };
            write_solution(create(&out)?, &sol, cfg.speed)?;
            eprintln!(
                "{algo}: flowtime {:.3}, makespan {:.3}, {:.2} ms",
                row.flowtime.unwrap_or(f64::NAN),
                row.makespan.unwrap_or(f64::NAN),
                row.runtime_ms.unwrap_or(f64::NAN)
            );
        }
        Command::Validate {
            map,
            agents,
            solution,
            radius,
        } => {
            let inst = load_instance(&map, &agents)?;
            let sol = read_solution(open(&solution)?)?;
            let report = validate_solution(&inst, &sol, 2.0 * radius);
            println!("{report}");
            if !report.is_valid() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Bench {
            map,
            algos,
            agents_range,
            instances,
            seed,
            csv,
            motion,
            endpoint_pool,
            jobs,
        } => {
            let grid = load_map(&map)?;
            let cfg = BenchConfig {
                map_name: map_name(&map),
                algorithms: algos,
                agent_counts: parse_range(&agents_range)?,
                instances,
                seed,
                repair: motion.config()?,
                endpoint_pool: endpoint_pool.as_deref().map(load_pool).transpose()?,
                jobs: if jobs == 0 { rayon_threads() } else { jobs },
            };
            let rows = run_benchmark(&grid, &cfg)?;
            write_metrics_csv(create(&csv)?, &rows)?;
            let failed = rows.iter().filter(|r| !r.success).count();
            eprintln!(
                "{} rows written to {} ({failed} unsolved)",
                rows.len(),
                csv.display()
            );
        }
        Command::Summary { csv, out } => {
            let rows = read_metrics_csv(open(&csv)?)?;
            let summary = summarize(&rows);
            match out {
                Some(path) => write_summary_csv(create(&path)?, &summary)?,
                None => write_summary_csv(io::stdout().lock(), &summary)?,
            }
        }
        Command::ExportMap {
            name,
            out,
            endpoint_pool,
        } => {
            let (grid, pool) = match name {
                BuiltinMap::Empty64 => (instance::empty_64(), None),
                BuiltinMap::Warehouse => {
                    let g = instance::warehouse();
                    let pool = instance::rack_face_cells(&g);
                    (g, Some(pool))
                }
            };
            let mut w = create(&out)?;
            w.write_all(grid.to_map_string().as_bytes())?;
            w.flush()?;
            match (endpoint_pool, pool) {
                (Some(path), Some(cells)) => write_endpoint_pool(create(&path)?, &cells)?,
                (Some(_), None) => bail!("this map has no endpoint pool"),
                _ => {}
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_map(path: &Path) -> Result<GridMap> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.parse::<GridMap>()
        .with_context(|| format!("bad map file {}", path.display()))
}

fn load_pool(path: &Path) -> Result<Vec<mapf_repair::Cell>> {
    read_endpoint_pool(open(path)?).with_context(|| format!("bad endpoint pool {}", path.display()))
}

fn load_instance(map: &Path, agents: &Path) -> Result<Instance> {
    let grid = load_map(map)?;
    let agents = read_agents(open(agents)?)
        .with_context(|| format!("bad agents file {}", agents.display()))?;
    let inst = Instance::new(grid, agents);
    inst.check_endpoints()?;
    Ok(inst)
}

fn map_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn parse_range(spec: &str) -> Result<Vec<usize>> {
    let parts: Vec<usize> = spec
        .split(':')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad agent range `{spec}`"))?;
    match parts[..] {
        [n] => Ok(vec![n]),
        [lo, hi] => Ok((lo..=hi).collect()),
        [lo, hi, step] if step > 0 => Ok((lo..=hi).step_by(step).collect()),
        _ => bail!("bad agent range `{spec}`, expected start:end:step"),
    }
}
