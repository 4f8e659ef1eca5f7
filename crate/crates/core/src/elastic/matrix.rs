use std::io::{Read, Write};

use rayon::prelude::*;

use super::{to_srvf, Aligner, PairDistance, Srvf};
use crate::error::{Error, Result};
use crate::functional::Curve;

const MAGIC: &[u8; 4] = b"FDSM";

/// Version of the binary distance-matrix format.
pub const DISTANCE_FORMAT_VERSION: u32 = 1;

/// Symmetric amplitude, phase and combined distance matrices, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    delta: f64,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
    combined: Vec<f64>,
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::invalid(format!("delta {delta} outside [0, 1]")))
    }
}

fn mix(delta: f64, amplitude: &[f64], phase: &[f64]) -> Vec<f64> {
    amplitude
        .iter()
        .zip(phase)
        .map(|(a, p)| delta * a + (1.0 - delta) * p)
        .collect()
}

impl DistanceMatrix {
    /// Builds the matrix from the strict upper triangle in row order
    /// `(0,1), (0,2), …, (n-2,n-1)`.
    pub fn from_upper(n: usize, delta: f64, pairs: &[PairDistance]) -> Result<Self> {
        check_delta(delta)?;
        if pairs.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::invalid("pair count does not match n"));
        }
        let mut amplitude = vec![0.0; n * n];
        let mut phase = vec![0.0; n * n];
        let mut it = pairs.iter();
        for i in 0..n {
            for j in i + 1..n {
                let d = it.next().expect("length checked");
                amplitude[i * n + j] = d.amplitude;
                amplitude[j * n + i] = d.amplitude;
                phase[i * n + j] = d.phase;
                phase[j * n + i] = d.phase;
            }
        }
        let combined = mix(delta, &amplitude, &phase);
        Ok(Self {
            n,
            delta,
            amplitude,
            phase,
            combined,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn amplitude(&self, i: usize, j: usize) -> f64 {
        self.amplitude[i * self.n + j]
    }

    pub fn phase(&self, i: usize, j: usize) -> f64 {
        self.phase[i * self.n + j]
    }

    pub fn combined(&self, i: usize, j: usize) -> f64 {
        self.combined[i * self.n + j]
    }

    pub fn amplitude_matrix(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn phase_matrix(&self) -> &[f64] {
        &self.phase
    }

    pub fn combined_matrix(&self) -> &[f64] {
        &self.combined
    }

    /// Same amplitude and phase, recombined with another `delta`.
    pub fn remix(&self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            n: self.n,
            delta,
            amplitude: self.amplitude.clone(),
            phase: self.phase.clone(),
            combined: mix(delta, &self.amplitude, &self.phase),
        })
    }

    /// Submatrix on `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let k = indices.len();
        let pick = |src: &[f64]| {
            let mut out = Vec::with_capacity(k * k);
            for &i in indices {
                for &j in indices {
                    out.push(src[i * self.n + j]);
                }
            }
            out
        };
        Self {
            n: k,
            delta: self.delta,
            amplitude: pick(&self.amplitude),
            phase: pick(&self.phase),
            combined: pick(&self.combined),
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let n = u32::try_from(self.n).map_err(|_| Error::invalid("matrix too large"))?;
        out.write_all(MAGIC)?;
        out.write_all(&DISTANCE_FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&self.delta.to_le_bytes())?;
        for block in [&self.amplitude, &self.phase, &self.combined] {
            let mut buf = Vec::with_capacity(block.len() * 8);
            for v in block.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a distance matrix file".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != DISTANCE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "distance matrix version {version} (supported: {DISTANCE_FORMAT_VERSION})"
            )));
        }
        input.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        let mut dword = [0u8; 8];
        input.read_exact(&mut dword)?;
        let delta = f64::from_le_bytes(dword);
        check_delta(delta)?;
        let mut block = || -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * n * 8];
            input.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let amplitude = block()?;
        let phase = block()?;
        let combined = block()?;
        Ok(Self {
            n,
            delta,
            amplitude,
            phase,
            combined,
        })
    }
}

pub fn srvfs_of(curves: &[Curve]) -> Vec<Srvf> {
    curves.par_iter().map(|c| to_srvf(&c.values)).collect()
}

/// Distances for every unordered pair `i < j`, aligning `j` onto `i`, in
/// row order. Output does not depend on the thread count.
pub fn pairwise_distances(aligner: &Aligner, srvfs: &[Srvf]) -> Vec<PairDistance> {
    let n = srvfs.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .map(|&(i, j)| aligner.distance(&srvfs[i], &srvfs[j]))
        .collect()
}

/// Full distance matrix of `curves` with mixing weight `delta`.
pub fn distance_matrix(aligner: &Aligner, curves: &[Curve], delta: f64) -> Result<DistanceMatrix> {
    check_delta(delta)?;
    if curves.is_empty() {
        return Err(Error::invalid("distance matrix of an empty dataset"));
    }
    let srvfs = srvfs_of(curves);
    let pairs = pairwise_distances(aligner, &srvfs);
    DistanceMatrix::from_upper(curves.len(), delta, &pairs)
}

/// `rows × cols` distances, aligning each `cols` element onto each `rows`
/// element; row-major.
pub fn cross_distances(aligner: &Aligner, rows: &[Srvf], cols: &[Srvf]) -> Vec<PairDistance> {
    let c = cols.len();
    (0..rows.len() * c)
        .into_par_iter()
        .map(|k| aligner.distance(&rows[k / c], &cols[k % c]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_roundtrip_and_remix() {
        let pairs = [
            PairDistance {
                amplitude: 1.0,
                phase: 0.1,
            },
            PairDistance {
                amplitude: 2.0,
                phase: 0.2,
            },
            PairDistance {
                amplitude: 3.0,
                phase: 0.3,
            },
        ];
        let d = DistanceMatrix::from_upper(3, 0.25, &pairs).unwrap();
        assert_eq!(d.combined(1, 2), 0.25 * 3.0 + 0.75 * 0.3);
        assert_eq!(d.combined(2, 1), d.combined(1, 2));
        assert_eq!(d.combined(1, 1), 0.0);

        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"FDSM");
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 3 * 9 * 8);
        assert_eq!(DistanceMatrix::read_from(&buf[..]).unwrap(), d);

        let one = d.remix(1.0).unwrap();
        assert_eq!(one.combined_matrix(), one.amplitude_matrix());
        let zero = d.remix(0.0).unwrap();
        assert_eq!(zero.combined_matrix(), zero.phase_matrix());

        buf[4] = 7;
        assert!(matches!(DistanceMatrix::read_from(&buf[..]), Err(Error::Format(_))));
    }
}
