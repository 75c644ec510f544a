//! Binary field dumps.
//!
//! Layout, all little-endian: `u64` grid size `N`, `f64` half-length `L`,
//! then `N³` `f64` values of `ψ` followed by `N³` values of `π`. Values are in
//! row-major order over `(x₁, x₂, x₃)` with each coordinate ascending from
//! `−L` in steps of `2L/N`, so `x₃` varies fastest.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::{FieldPair, GridOps};
use crate::grid::SpectralGrid;

pub fn write_field_dump<W: Write>(mut out: W, grid: &SpectralGrid, f: &FieldPair) -> Result<()> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!("field of {} values on a grid of {}", f.len(), grid.len())));
    }
    let n = grid.n();
    out.write_all(&(n as u64).to_le_bytes())?;
    out.write_all(&grid.half_length().to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * n);
    for comp in [&f.psi, &f.pi] {
        for a in 0..n {
            for b in 0..n {
                buf.clear();
                for c in 0..n {
                    let idx = grid.flatten(fft_index(n, a), fft_index(n, b), fft_index(n, c));
                    buf.extend_from_slice(&comp[idx].to_le_bytes());
                }
                out.write_all(&buf)?;
            }
        }
    }
    Ok(())
}

/// Reads a dump written by [`write_field_dump`].
pub fn read_field_dump<R: Read>(mut input: R) -> Result<(SpectralGrid, FieldPair)> {
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b8)?;
    let l = f64::from_le_bytes(b8);
    let grid = SpectralGrid::new(n, l)?;
    let mut f = FieldPair::zeros(&grid);
    for comp in [&mut f.psi, &mut f.pi] {
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    input.read_exact(&mut b8)?;
                    let idx = grid.flatten(fft_index(n, a), fft_index(n, b), fft_index(n, c));
                    comp[idx] = f64::from_le_bytes(b8);
                }
            }
        }
    }
    Ok((grid, f))
}

/// [`write_field_dump`] for coefficients.
pub fn write_spectral_dump<W: Write>(out: W, ops: &GridOps, f: &crate::field::SpectralPair) -> Result<()> {
    write_field_dump(out, ops.grid(), &ops.pair_to_real(f))
}

/// FFT-order index of the natural index `a`.
fn fft_index(n: usize, a: usize) -> usize {
    (a + n / 2) % n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip_and_layout() {
        let grid = SpectralGrid::new(4, 2.0).unwrap();
        let psi = grid.sample(|x| x[0] * 100.0 + x[1] * 10.0 + x[2]);
        let pi = grid.sample(|x| -x[2]);
        let f = FieldPair { psi, pi };
        let mut bytes = Vec::new();
        write_field_dump(&mut bytes, &grid, &f).unwrap();
        assert_eq!(bytes.len(), 16 + 2 * 64 * 8);
        assert_eq!(u64::from_le_bytes(bytes[0..8].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2.0);
        let first = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let second = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        assert_eq!(first, -222.0);
        assert_eq!(second, -221.0);
        let (g2, f2) = read_field_dump(&bytes[..]).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(f2, f);
    }
}
