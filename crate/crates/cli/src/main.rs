use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uwoc_core::ooc::OocParams;
use uwoc_core::reference::{emit_reference_tables, interference_csv};
use uwoc_core::scenario::{
    load_scenario_with_cache, parse_hop_spec, run_campaign, write_atomic, CampaignOptions, ChannelCache,
};
use uwoc_core::transport::{channel_loss, check_isi_condition, impulse_response_to_csv, DEFAULT_ISI_RATIO};
use uwoc_core::turbulence::{fading_from_scintillation, scintillation_index, TurbulenceParams};
use uwoc_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "uwoc", version, about = "Relay-assisted underwater optical CDMA link simulator")]
struct Cli {
    /// Overrides the scenario or transport seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Monte Carlo bit count.
    #[arg(long, global = true)]
    bits: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; CSV goes to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs every sub-scenario and power point of a scenario file.
    Run { scenario: PathBuf },
    /// Prints the interference pattern table of an OOC.
    DumpPatterns {
        #[arg(long, default_value_t = 5)]
        users: usize,
        #[arg(long, default_value_t = 50)]
        length: usize,
        #[arg(long, default_value_t = 3)]
        weight: usize,
    },
    /// Regenerates the published channel and interference tables.
    ReferenceTables,
    /// Simulates one hop, e.g. `range=30,divergence=0.02,photons=1000000`.
    Channel { hop_spec: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_schema() { EXIT_SCHEMA } else { EXIT_FAILURE })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Run { scenario } => run(cli, scenario),
        Command::DumpPatterns { users, length, weight } => {
            let text = interference_csv(*users, OocParams::new(*length, *weight)?)?;
            emit(cli.out.as_deref(), "patterns.csv", &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ReferenceTables => {
            let tables = emit_reference_tables(Some(&TurbulenceParams::reference()))?;
            emit(cli.out.as_deref(), "interference.csv", &tables.interference)?;
            emit(cli.out.as_deref(), "collimated_channels.csv", &tables.collimated)?;
            emit(cli.out.as_deref(), "placement_channels.csv", &tables.placement)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Channel { hop_spec } => channel(cli, hop_spec),
    }
}

fn run(cli: &Cli, path: &Path) -> Result<ExitCode, Error> {
    if !path.is_file() {
        return Err(Error::Schema {
            field: "scenario".into(),
            message: format!("no such file: {}", path.display()),
        });
    }
    let cache = match &cli.out {
        Some(dir) => ChannelCache::on_disk(dir.join("cache")),
        None => ChannelCache::in_memory(),
    };
    let scenario = load_scenario_with_cache(path, &cache)?;
    let opts = CampaignOptions {
        jobs: cli.jobs,
        bit_count: cli.bits,
        seed: cli.seed,
    };
    let table = run_campaign(&scenario, &opts)?;
    emit(cli.out.as_deref(), &format!("{}.csv", scenario.name), &table.to_csv())?;
    let failed = table.failed_rows();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed", table.rows.len());
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn channel(cli: &Cli, spec: &str) -> Result<ExitCode, Error> {
    let mut request = parse_hop_spec(spec)?;
    if let Some(seed) = cli.seed {
        request.transport.seed = seed;
    }
    let cache = match &cli.out {
        Some(dir) => ChannelCache::on_disk(dir.join("cache")),
        None => ChannelCache::in_memory(),
    };
    let ir = cache.impulse_response(&request.water, &request.geometry, &request.transport)?;
    let loss = channel_loss(&ir, request.chip_duration);
    let isi = check_isi_condition(&ir, request.chip_duration, DEFAULT_ISI_RATIO);
    let si = scintillation_index(&TurbulenceParams::reference(), request.geometry.range, request.geometry.wavelength)?;
    let fading = fading_from_scintillation(si)?;
    let summary = format!(
        "range_m,divergence_deg,loss,received_fraction,isi_ratio,isi_ok,scintillation_index,sigma2_x\n{},{},{:.6e},{:.6e},{:.6e},{},{:.6e},{:.6e}\n",
        request.geometry.range,
        request.geometry.tx_full_divergence_deg,
        loss,
        ir.total_received_fraction,
        isi.ratio,
        isi.satisfied,
        si,
        fading.sigma2_x
    );
    emit(cli.out.as_deref(), "channel.csv", &summary)?;
    if let Some(dir) = &cli.out {
        write_atomic(
            &dir.join("impulse_response.csv"),
            &impulse_response_to_csv(&ir, &request.water, &request.geometry, &request.transport),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn emit(out: Option<&Path>, file_name: &str, text: &str) -> Result<(), Error> {
    match out {
        Some(dir) => write_atomic(&dir.join(file_name), text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
