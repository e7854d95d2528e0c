//! JSON representation: complex entries as `[re, im]` pairs, dimensions and
//! traces explicit. Deserialization re-runs every constructor check.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ComplexMatrix, DensityMatrix, HermitianMatrix, C64};

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    dim: usize,
    trace: f64,
    entries: Vec<[f64; 2]>,
}

fn entries(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    m.as_slice().iter().map(|z| [z.re, z.im]).collect()
}

fn complexes(e: &[[f64; 2]]) -> Vec<C64> {
    e.iter().map(|p| C64::new(p[0], p[1])).collect()
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            entries: entries(self),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        ComplexMatrix::new(r.rows, r.cols, complexes(&r.entries)).map_err(serde::de::Error::custom)
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.matrix().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(d)?;
        HermitianMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DensityRepr {
            dim: self.dim(),
            trace: self.trace(),
            entries: entries(self.matrix()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = DensityRepr::deserialize(d)?;
        let m = ComplexMatrix::new(r.dim, r.dim, complexes(&r.entries))
            .map_err(serde::de::Error::custom)?;
        let h = HermitianMatrix::new(m).map_err(serde::de::Error::custom)?;
        DensityMatrix::with_trace(h, r.trace).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_round_trip_is_exact() {
        let m = ComplexMatrix::new(
            2,
            2,
            vec![
                C64::new(0.3, 0.0),
                C64::new(0.1, -0.2),
                C64::new(0.1, 0.2),
                C64::new(0.7, 0.0),
            ],
        )
        .unwrap();
        let rho = DensityMatrix::from_matrix(m).unwrap();
        let s = serde_json::to_string(&rho).unwrap();
        let back: DensityMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn tampered_trace_is_rejected() {
        let s = r#"{"dim":2,"trace":0.9,"entries":[[0.5,0],[0,0],[0,0],[0.5,0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(s).is_err());
    }

    #[test]
    fn wrong_entry_count_is_rejected() {
        let s = r#"{"rows":2,"cols":2,"entries":[[1,0]]}"#;
        assert!(serde_json::from_str::<ComplexMatrix>(s).is_err());
    }
}
