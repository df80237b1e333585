//! Linux powercap (RAPL) counters.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use surropt_core::energy::{EnergyBackend, EnergyError, EnergySample};

pub const POWERCAP_ROOT: &str = "/sys/class/powercap";

/// Package 0 and, when present, its DRAM subdomain.
#[derive(Debug)]
pub struct PowercapBackend {
    package: PathBuf,
    dram: Option<PathBuf>,
    cpu_max_uj: u64,
    dram_max_uj: u64,
    start: Instant,
}

fn read_u64(path: &Path) -> Result<u64, EnergyError> {
    let text = fs::read_to_string(path).map_err(|e| EnergyError::Unavailable(format!("{}: {e}", path.display())))?;
    text.trim()
        .parse()
        .map_err(|e| EnergyError::Unavailable(format!("{}: {e}", path.display())))
}

impl PowercapBackend {
    pub fn open_default() -> Result<Self, EnergyError> {
        Self::open(Path::new(POWERCAP_ROOT))
    }

    /// Opens `<root>/intel-rapl:0`, looking for a `dram` subdomain
    /// `intel-rapl:0:<m>`.
    pub fn open(root: &Path) -> Result<Self, EnergyError> {
        let package = root.join("intel-rapl:0");
        let cpu_max_uj = read_u64(&package.join("max_energy_range_uj"))?;
        read_u64(&package.join("energy_uj"))?;

        let mut dram = None;
        let mut dram_max_uj = 0;
        if let Ok(entries) = fs::read_dir(&package) {
            let mut subdomains: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("intel-rapl:0:")))
                .collect();
            subdomains.sort();
            for sub in subdomains {
                let name = fs::read_to_string(sub.join("name")).unwrap_or_default();
                if name.trim() == "dram" {
                    dram_max_uj = read_u64(&sub.join("max_energy_range_uj"))?;
                    dram = Some(sub);
                    break;
                }
            }
        }
        Ok(Self { package, dram, cpu_max_uj, dram_max_uj, start: Instant::now() })
    }

    pub fn has_dram(&self) -> bool {
        self.dram.is_some()
    }
}

impl EnergyBackend for PowercapBackend {
    fn read(&self) -> Result<EnergySample, EnergyError> {
        let cpu_uj = read_u64(&self.package.join("energy_uj"))?;
        let dram_uj = match &self.dram {
            Some(d) => read_u64(&d.join("energy_uj"))?,
            None => 0,
        };
        Ok(EnergySample {
            cpu_uj,
            dram_uj,
            timestamp_ns: self.start.elapsed().as_nanos() as u64,
            cpu_max_uj: self.cpu_max_uj,
            dram_max_uj: if self.dram.is_some() { self.dram_max_uj } else { 1 },
            dram_available: self.dram.is_some(),
        })
    }
}

/// Monotonic wall clock in nanoseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl surropt_core::energy::Clock for WallClock {
    fn now_ns(&self) -> u64 {
        self.0.elapsed().as_nanos() as u64
    }
}
