//! Binary state snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   4 bytes  "AXBQ"
//! version u32      currently 1
//! nr      u32
//! nz      u32
//! R       f64      radial extent
//! Lz      f64      z period
//! t       f64      simulation time
//! omega   nr*nz f64, row-major (i*nz + j)
//! rho     nr*nz f64, row-major
//! ```
//!
//! A snapshot restores to an exact [`SimState`]: the floats round-trip
//! bit-for-bit, so a resumed run continues from the identical state.

use axbq::fields::{MeridianGrid, Parity, ScalarField2D};
use axbq::solver::{SimState, SolverError};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"AXBQ";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a snapshot: bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported snapshot version {got} (this build reads {VERSION})")]
    BadVersion { got: u32 },
    #[error("snapshot truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("snapshot has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("snapshot grid: {0}")]
    Field(#[from] axbq::fields::FieldError),
    #[error("snapshot state: {0}")]
    Solver(#[from] SolverError),
}

/// A simulation state detached from any grid object, ready for disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nr: u32,
    pub nz: u32,
    pub r_extent: f64,
    pub z_period: f64,
    pub t: f64,
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(state: &SimState) -> Snapshot {
        let grid = state.grid();
        Snapshot {
            nr: grid.nr() as u32,
            nz: grid.nz() as u32,
            r_extent: grid.r_extent(),
            z_period: grid.z_period(),
            t: state.t(),
            omega: state.omega().values().to_vec(),
            rho: state.rho().values().to_vec(),
        }
    }

    pub fn to_state(&self) -> Result<SimState, SnapshotError> {
        let grid = MeridianGrid::new(
            self.nr as usize,
            self.nz as usize,
            self.r_extent,
            self.z_period,
        )?;
        let omega =
            ScalarField2D::from_values(Arc::clone(&grid), Parity::Odd, self.omega.clone())?;
        let rho = ScalarField2D::from_values(grid, Parity::Even, self.rho.clone())?;
        Ok(SimState::with_time(self.t, omega, rho)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.omega.len() + self.rho.len();
        let mut out = Vec::with_capacity(36 + 8 * n);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.nr.to_le_bytes());
        out.extend_from_slice(&self.nz.to_le_bytes());
        out.extend_from_slice(&self.r_extent.to_le_bytes());
        out.extend_from_slice(&self.z_period.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for v in self.omega.iter().chain(self.rho.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
        let need_header = 40;
        if bytes.len() < need_header {
            return Err(SnapshotError::Truncated {
                need: need_header,
                have: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("sliced to 4");
        if magic != MAGIC {
            return Err(SnapshotError::BadMagic(magic));
        }
        let u32_at = |off: usize| {
            u32::from_le_bytes(bytes[off..off + 4].try_into().expect("sliced to 4"))
        };
        let f64_at = |off: usize| {
            f64::from_le_bytes(bytes[off..off + 8].try_into().expect("sliced to 8"))
        };
        let version = u32_at(4);
        if version != VERSION {
            return Err(SnapshotError::BadVersion { got: version });
        }
        let nr = u32_at(8);
        let nz = u32_at(12);
        let len = (nr as usize) * (nz as usize);
        let need = need_header + 16 * len;
        match bytes.len().cmp(&need) {
            std::cmp::Ordering::Less => {
                return Err(SnapshotError::Truncated {
                    need,
                    have: bytes.len(),
                })
            }
            std::cmp::Ordering::Greater => {
                return Err(SnapshotError::TrailingBytes {
                    extra: bytes.len() - need,
                })
            }
            std::cmp::Ordering::Equal => {}
        }
        let field_at =
            |start: usize| (0..len).map(|k| f64_at(start + 8 * k)).collect::<Vec<f64>>();
        Ok(Snapshot {
            nr,
            nz,
            r_extent: f64_at(16),
            z_period: f64_at(24),
            t: f64_at(32),
            omega: field_at(need_header),
            rho: field_at(need_header + 8 * len),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), SnapshotError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn read(path: &Path) -> Result<Snapshot, SnapshotError> {
        Snapshot::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use axbq::presets::{reference_bubble_grid, reference_bubble_state};

    fn sample_state() -> SimState {
        let grid = reference_bubble_grid(16).unwrap();
        reference_bubble_state(&grid).unwrap()
    }

    #[test]
    fn bytes_round_trip_bit_for_bit() {
        let state = sample_state();
        let snap = Snapshot::from_state(&state);
        let back = Snapshot::from_bytes(&snap.to_bytes()).unwrap();
        assert_eq!(snap, back);
        let restored = back.to_state().unwrap();
        assert_eq!(restored.t(), state.t());
        assert_eq!(restored.omega().values(), state.omega().values());
        assert_eq!(restored.rho().values(), state.rho().values());
    }

    #[test]
    fn header_is_stable() {
        let snap = Snapshot::from_state(&sample_state());
        let bytes = snap.to_bytes();
        assert_eq!(&bytes[0..4], b"AXBQ");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 16);
        assert_eq!(bytes.len(), 40 + 16 * snap.omega.len());
    }

    #[test]
    fn rejects_foreign_and_damaged_bytes() {
        let snap = Snapshot::from_state(&sample_state());
        let mut bytes = snap.to_bytes();

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'Z';
        assert!(matches!(
            Snapshot::from_bytes(&wrong_magic),
            Err(SnapshotError::BadMagic(_))
        ));

        let mut wrong_version = bytes.clone();
        wrong_version[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            Snapshot::from_bytes(&wrong_version),
            Err(SnapshotError::BadVersion { got: 7 })
        ));

        let truncated = &bytes[..bytes.len() - 8];
        assert!(matches!(
            Snapshot::from_bytes(truncated),
            Err(SnapshotError::Truncated { .. })
        ));

        bytes.push(0);
        assert!(matches!(
            Snapshot::from_bytes(&bytes),
            Err(SnapshotError::TrailingBytes { extra: 1 })
        ));
    }
}
