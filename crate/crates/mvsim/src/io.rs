//! Configuration parsing, binary state snapshots, and CSV emission.
//!
//! Config files are plain `key = value` lines with `#` comments. Snapshots
//! are a fixed little-endian binary layout with a CRC32 trailer so that
//! write/read round trips are bit-exact.

use crate::error::{MvError, Result};
use crate::model::{
    AnisotropyModel, ElasticModel, ElasticPerturbation, ExternalField, HextMode, ModelParams,
    SimState,
};
use crate::spectral::{Grid, SpectralField};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::io::{Read as _, Write as _};
use std::path::Path;

// ---------------------------------------------------------------------------
// Run configuration.
// ---------------------------------------------------------------------------

/// Named initial-condition presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPreset {
    Equilibrium,
    Smooth,
    Large,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub nu: f64,
    pub kappa: f64,
    pub mu0: f64,
    pub chi: f64,
    pub elastic_perturbation: f64,
    pub alpha: f64,
    pub axis: [f64; 3],
    pub hext_constant: [f64; 3],
    pub hext_modes: Vec<HextMode>,
    pub initial: InitialPreset,
    pub seed: u64,
    pub scale: f64,
    pub renormalize_every: usize,
    pub cfl_safety: f64,
    pub snapshot_every: usize,
    pub scan_radius: f64,
    pub eps0: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 32,
            dt: 1e-3,
            t_final: 0.05,
            nu: 1.0,
            kappa: 1.0,
            mu0: 1.0,
            chi: 1.0,
            elastic_perturbation: 0.0,
            alpha: 0.0,
            axis: [0.0, 0.0, 1.0],
            hext_constant: [0.0; 3],
            hext_modes: Vec::new(),
            initial: InitialPreset::Smooth,
            seed: 1,
            scale: 0.05,
            renormalize_every: 1,
            cfl_safety: 0.5,
            snapshot_every: 0,
            scan_radius: 0.5,
            eps0: 0.5,
        }
    }
}

impl RunConfig {
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let elastic = if self.elastic_perturbation > 0.0 {
            ElasticModel::with_perturbation(
                self.chi,
                Some(ElasticPerturbation { amplitude: self.elastic_perturbation }),
            )?
        } else {
            ElasticModel::new(self.chi)?
        };
        let params = ModelParams {
            nu: self.nu,
            kappa: self.kappa,
            mu0: self.mu0,
            elastic,
            aniso: AnisotropyModel::new(self.alpha, self.axis)?,
            hext: ExternalField { constant: self.hext_constant, modes: self.hext_modes.clone() },
            t_final: self.t_final,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn initial_state(&self) -> Result<SimState> {
        let grid = Grid::new(self.n)?;
        match self.initial {
            InitialPreset::Equilibrium => Ok(SimState::equilibrium(grid, self.axis)),
            InitialPreset::Smooth => crate::presets::smooth_state(grid, self.seed, self.scale),
            InitialPreset::Large => crate::presets::large_state(grid, self.seed, self.scale),
        }
    }

    fn validate(&self, line_of: impl Fn(&str) -> usize) -> Result<()> {
        let fail = |key: &str, message: String| -> Result<()> {
            Err(MvError::ConfigError { line: line_of(key), message })
        };
        if !(self.n >= 8 && self.n.is_power_of_two()) {
            return fail("n", format!("n must be a power of two >= 8, got {}", self.n));
        }
        if !(self.dt > 0.0) {
            return fail("dt", format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final > 0.0) {
            return fail("t_final", format!("t_final must be positive, got {}", self.t_final));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1.0 {
            return fail("t_final", format!("t_final/dt = {steps} is not within one step of an integer"));
        }
        if !(self.nu > 0.0) {
            return fail("nu", format!("nu must be positive, got {}", self.nu));
        }
        if !(self.kappa > 0.0) {
            return fail("kappa", format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.chi > 0.0) {
            return fail("chi", format!("chi must be positive, got {}", self.chi));
        }
        if self.elastic_perturbation < 0.0 || self.elastic_perturbation >= self.chi {
            return fail(
                "elastic_perturbation",
                format!(
                    "elastic_perturbation must lie in [0, chi), got {}",
                    self.elastic_perturbation
                ),
            );
        }
        if self.alpha < 0.0 {
            return fail("alpha", format!("alpha must be nonnegative, got {}", self.alpha));
        }
        if self.renormalize_every == 0 {
            return fail("renormalize_every", "renormalize_every must be positive".into());
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return fail("cfl_safety", format!("cfl_safety must be in (0,1), got {}", self.cfl_safety));
        }
        if !(self.scan_radius > 0.0 && self.scan_radius < std::f64::consts::PI) {
            return fail("scan_radius", format!("scan_radius must be in (0, pi), got {}", self.scan_radius));
        }
        if !(self.eps0 > 0.0) {
            return fail("eps0", format!("eps0 must be positive, got {}", self.eps0));
        }
        Ok(())
    }

    /// Canonical config text: parsing it reproduces `self` exactly.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let v3 = |v: [f64; 3]| format!("{:?},{:?},{:?}", v[0], v[1], v[2]);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "dt = {:?}", self.dt);
        let _ = writeln!(s, "t_final = {:?}", self.t_final);
        let _ = writeln!(s, "nu = {:?}", self.nu);
        let _ = writeln!(s, "kappa = {:?}", self.kappa);
        let _ = writeln!(s, "mu0 = {:?}", self.mu0);
        let _ = writeln!(s, "chi = {:?}", self.chi);
        let _ = writeln!(s, "elastic_perturbation = {:?}", self.elastic_perturbation);
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "axis = {}", v3(self.axis));
        let _ = writeln!(s, "hext_constant = {}", v3(self.hext_constant));
        for m in &self.hext_modes {
            let _ = writeln!(
                s,
                "hext_mode = {},{},{:?},{:?},{:?},{:?}",
                m.wavevector[0], m.wavevector[1], m.amplitude[0], m.amplitude[1], m.amplitude[2],
                m.omega
            );
        }
        let name = match self.initial {
            InitialPreset::Equilibrium => "equilibrium",
            InitialPreset::Smooth => "smooth",
            InitialPreset::Large => "large",
        };
        let _ = writeln!(s, "initial = {name}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "scale = {:?}", self.scale);
        let _ = writeln!(s, "renormalize_every = {}", self.renormalize_every);
        let _ = writeln!(s, "cfl_safety = {:?}", self.cfl_safety);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "scan_radius = {:?}", self.scan_radius);
        let _ = writeln!(s, "eps0 = {:?}", self.eps0);
        s
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.trim().parse().map_err(|_| MvError::ConfigError {
        line,
        message: format!("cannot parse value {value:?} for key {key:?}"),
    })
}

fn parse_vec3(value: &str, line: usize, key: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 3 {
        return Err(MvError::ConfigError {
            line,
            message: format!("{key:?} needs three comma-separated numbers, got {value:?}"),
        });
    }
    Ok([
        parse_num(parts[0], line, key)?,
        parse_num(parts[1], line, key)?,
        parse_num(parts[2], line, key)?,
    ])
}

/// Parse a `key = value` config; the first error is reported with its line
/// number (1-based).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut key_lines: std::collections::HashMap<String, usize> = Default::default();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| MvError::ConfigError {
            line: lineno,
            message: format!("expected key = value, got {raw:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        key_lines.insert(key.to_string(), lineno);
        match key {
            "n" => cfg.n = parse_num(value, lineno, key)?,
            "dt" => cfg.dt = parse_num(value, lineno, key)?,
            "t_final" => cfg.t_final = parse_num(value, lineno, key)?,
            "nu" => cfg.nu = parse_num(value, lineno, key)?,
            "kappa" => cfg.kappa = parse_num(value, lineno, key)?,
            "mu0" => cfg.mu0 = parse_num(value, lineno, key)?,
            "chi" => cfg.chi = parse_num(value, lineno, key)?,
            "elastic_perturbation" => cfg.elastic_perturbation = parse_num(value, lineno, key)?,
            "alpha" => cfg.alpha = parse_num(value, lineno, key)?,
            "axis" => cfg.axis = parse_vec3(value, lineno, key)?,
            "hext_constant" => cfg.hext_constant = parse_vec3(value, lineno, key)?,
            "hext_mode" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 6 {
                    return Err(MvError::ConfigError {
                        line: lineno,
                        message: format!("hext_mode needs kx,ky,ax,ay,az,omega, got {value:?}"),
                    });
                }
                cfg.hext_modes.push(HextMode {
                    wavevector: [
                        parse_num(parts[0], lineno, key)?,
                        parse_num(parts[1], lineno, key)?,
                    ],
                    amplitude: [
                        parse_num(parts[2], lineno, key)?,
                        parse_num(parts[3], lineno, key)?,
                        parse_num(parts[4], lineno, key)?,
                    ],
                    omega: parse_num(parts[5], lineno, key)?,
                });
            }
            "initial" => {
                cfg.initial = match value {
                    "equilibrium" => InitialPreset::Equilibrium,
                    "smooth" => InitialPreset::Smooth,
                    "large" => InitialPreset::Large,
                    other => {
                        return Err(MvError::ConfigError {
                            line: lineno,
                            message: format!(
                                "unknown preset {other:?} (expected equilibrium, smooth, or large)"
                            ),
                        })
                    }
                }
            }
            "seed" => cfg.seed = parse_num(value, lineno, key)?,
            "scale" => cfg.scale = parse_num(value, lineno, key)?,
            "renormalize_every" => cfg.renormalize_every = parse_num(value, lineno, key)?,
            "cfl_safety" => cfg.cfl_safety = parse_num(value, lineno, key)?,
            "snapshot_every" => cfg.snapshot_every = parse_num(value, lineno, key)?,
            "scan_radius" => cfg.scan_radius = parse_num(value, lineno, key)?,
            "eps0" => cfg.eps0 = parse_num(value, lineno, key)?,
            other => {
                return Err(MvError::ConfigError {
                    line: lineno,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    cfg.validate(|key| key_lines.get(key).copied().unwrap_or(0))?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Snapshots.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 6] = b"MVSIM1";
const VERSION: u32 = 1;

/// Serialize a state: magic, version (u32), n (u32), t (f64), then the
/// 10 n^2 complex coefficients of u (2), F (4), M (3), p (1) row-major
/// little-endian, then a CRC32 of the payload.
pub fn write_snapshot(state: &SimState, path: &Path) -> Result<()> {
    let n = state.grid().n() as u32;
    let mut payload =
        Vec::with_capacity(10 * (n as usize) * (n as usize) * 16);
    for field in [&state.u, &state.f, &state.m, &state.p] {
        for c in 0..field.components() {
            for iy in 0..n as usize {
                for ix in 0..n as usize {
                    let z = field.coeff(c, iy, ix);
                    payload.extend_from_slice(&z.re.to_le_bytes());
                    payload.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
    }
    let crc = crc32fast::hash(&payload);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&state.t.to_le_bytes())?;
    out.write_all(&payload)?;
    out.write_all(&crc.to_le_bytes())?;
    out.flush()?;
    Ok(())
}

fn corrupt(message: impl Into<String>) -> MvError {
    MvError::CorruptSnapshot(message.into())
}

pub fn read_snapshot(path: &Path) -> Result<SimState> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 6 + 4 + 4 + 8 + 4 {
        return Err(corrupt("file shorter than the fixed header"));
    }
    if &bytes[..6] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(6);
    if version != VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let n = u32_at(10) as usize;
    let t = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let payload_len = 10 * n * n * 16;
    let expected = 22 + payload_len + 4;
    if bytes.len() != expected {
        return Err(corrupt(format!(
            "file length {} does not match expected {expected} for n = {n}",
            bytes.len()
        )));
    }
    let payload = &bytes[22..22 + payload_len];
    let stored_crc = u32_at(22 + payload_len);
    let crc = crc32fast::hash(payload);
    if crc != stored_crc {
        return Err(corrupt(format!("checksum mismatch: stored {stored_crc:08x}, computed {crc:08x}")));
    }
    let grid = Grid::new(n)?;
    let mut cursor = 0usize;
    let mut take_field = |components: usize| -> SpectralField {
        let mut f = SpectralField::zeros(grid, components);
        for c in 0..components {
            for iy in 0..n {
                for ix in 0..n {
                    let re = f64::from_le_bytes(payload[cursor..cursor + 8].try_into().unwrap());
                    let im =
                        f64::from_le_bytes(payload[cursor + 8..cursor + 16].try_into().unwrap());
                    cursor += 16;
                    *f.coeff_mut(c, iy, ix) = Complex64::new(re, im);
                }
            }
        }
        f
    };
    let u = take_field(2);
    let f = take_field(4);
    let m = take_field(3);
    let p = take_field(1);
    let state = SimState::new(t, u, f, m, p);
    if !state.is_finite() {
        return Err(corrupt("non-finite coefficients in payload"));
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// CSV emission.
// ---------------------------------------------------------------------------

/// Full-precision locale-independent decimal for CSV cells.
pub fn csv_num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| csv_num(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
