//! Deterministic synthetic event data.
//!
//! Three fixed schemas stand in for real analysis files:
//!
//! * `nanoaod`: 20 normal `f32` scalars, 10 small-range uniform `i32`
//!   scalars and 4 variable `f32` columns (Poisson(5) lengths, values a
//!   threshold plus an exponential tail, like transverse momenta after a cut).
//! * `flat`: 4 normal `f64` and 4 uniform `i64` scalars.
//! * `carray`: one variable `i32` column, Poisson(20) lengths, values uniform
//!   in `[0, 2^16)`.
//!
//! Events are drawn one at a time from a single ChaCha8 stream, so a dataset
//! of `n` events is a prefix of the same dataset with more events.

use std::fmt;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::model::{Column, ColumnSchema, ColumnValues, ElementType, EventBatch, Schema};

/// Events per generated batch.
pub const BATCH_EVENTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetKind {
    NanoAodLike,
    FlatNtuple,
    CArray,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [DatasetKind::NanoAodLike, DatasetKind::FlatNtuple, DatasetKind::CArray];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::NanoAodLike => "nanoaod",
            DatasetKind::FlatNtuple => "flat",
            DatasetKind::CArray => "carray",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        DatasetKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn schema(self) -> Schema {
        let columns = column_specs(self)
            .iter()
            .map(|c| match c.gen {
                Gen::NormalF32(..) => ColumnSchema::fixed(c.name, ElementType::F32),
                Gen::UniformI32(..) => ColumnSchema::fixed(c.name, ElementType::I32),
                Gen::NormalF64(..) => ColumnSchema::fixed(c.name, ElementType::F64),
                Gen::UniformI64(..) => ColumnSchema::fixed(c.name, ElementType::I64),
                Gen::TailF32 { .. } => ColumnSchema::variable(c.name, ElementType::F32),
                Gen::ListI32 { .. } => ColumnSchema::variable(c.name, ElementType::I32),
            })
            .collect();
        Schema::new(columns).expect("built-in schemas are valid")
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy)]
enum Gen {
    NormalF32(f32, f32),
    UniformI32(i32, i32),
    NormalF64(f64, f64),
    UniformI64(i64, i64),
    /// Poisson(`mean_len`) elements, each `threshold + Exp(mean = tail)`.
    TailF32 { mean_len: f64, threshold: f32, tail: f32 },
    /// Poisson(`mean_len`) elements uniform in `lo..hi`.
    ListI32 { mean_len: f64, lo: i32, hi: i32 },
}

struct ColumnSpec {
    name: &'static str,
    gen: Gen,
}

const fn col(name: &'static str, gen: Gen) -> ColumnSpec {
    ColumnSpec { name, gen }
}

const NANOAOD: &[ColumnSpec] = &[
    col("MET_pt", Gen::NormalF32(40.0, 15.0)),
    col("MET_phi", Gen::NormalF32(0.0, 1.8)),
    col("MET_sumEt", Gen::NormalF32(900.0, 250.0)),
    col("PV_x", Gen::NormalF32(0.1, 0.01)),
    col("PV_y", Gen::NormalF32(-0.05, 0.01)),
    col("PV_z", Gen::NormalF32(0.0, 3.5)),
    col("PV_chi2", Gen::NormalF32(1.0, 0.2)),
    col("fixedGridRhoFastjetAll", Gen::NormalF32(20.0, 6.0)),
    col("Pileup_nTrueInt", Gen::NormalF32(32.0, 8.0)),
    col("Generator_weight", Gen::NormalF32(1.0, 0.05)),
    col("Generator_x1", Gen::NormalF32(0.1, 0.03)),
    col("Generator_x2", Gen::NormalF32(0.1, 0.03)),
    col("Generator_scalePDF", Gen::NormalF32(350.0, 90.0)),
    col("LHEWeight_originalXWGTUP", Gen::NormalF32(1.0, 0.02)),
    col("btagWeight", Gen::NormalF32(0.98, 0.01)),
    col("L1PreFiringWeight", Gen::NormalF32(0.97, 0.01)),
    col("puWeight", Gen::NormalF32(1.0, 0.15)),
    col("Z_mass", Gen::NormalF32(91.19, 2.5)),
    col("HT", Gen::NormalF32(300.0, 80.0)),
    col("BeamSpot_z0", Gen::NormalF32(0.5, 0.001)),
    col("PV_npvs", Gen::UniformI32(10, 60)),
    col("PV_npvsGood", Gen::UniformI32(8, 55)),
    col("nOtherPV", Gen::UniformI32(0, 3)),
    col("nSV", Gen::UniformI32(0, 8)),
    col("nIsoTrack", Gen::UniformI32(0, 4)),
    col("HLT_IsoMu24", Gen::UniformI32(0, 1)),
    col("HLT_Ele32_WPTight", Gen::UniformI32(0, 1)),
    col("HLT_PFMET120", Gen::UniformI32(0, 1)),
    col("Flag_goodVertices", Gen::UniformI32(0, 1)),
    col("Flag_METFilters", Gen::UniformI32(0, 1)),
    col("Jet_pt", Gen::TailF32 { mean_len: 5.0, threshold: 20.0, tail: 4.0 }),
    col("Muon_pt", Gen::TailF32 { mean_len: 5.0, threshold: 3.0, tail: 10.0 }),
    col("Electron_pt", Gen::TailF32 { mean_len: 5.0, threshold: 5.0, tail: 10.0 }),
    col("Photon_pt", Gen::TailF32 { mean_len: 5.0, threshold: 10.0, tail: 15.0 }),
];

const FLAT: &[ColumnSpec] = &[
    col("x", Gen::NormalF64(0.0, 1.0)),
    col("y", Gen::NormalF64(0.0, 1.0)),
    col("energy", Gen::NormalF64(50.0, 10.0)),
    col("mass", Gen::NormalF64(91.19, 2.5)),
    col("run", Gen::UniformI64(0, 9)),
    col("lumi", Gen::UniformI64(0, 999)),
    col("nTracks", Gen::UniformI64(0, 199)),
    col("charge_sum", Gen::UniformI64(-10, 10)),
];

const CARRAY: &[ColumnSpec] = &[col(
    "hits",
    Gen::ListI32 { mean_len: 20.0, lo: 0, hi: 1 << 16 },
)];

fn column_specs(kind: DatasetKind) -> &'static [ColumnSpec] {
    match kind {
        DatasetKind::NanoAodLike => NANOAOD,
        DatasetKind::FlatNtuple => FLAT,
        DatasetKind::CArray => CARRAY,
    }
}

/// The column NanoAOD-like data uses for the shuffle comparison: its values
/// mostly share one binary exponent.
pub const NARROW_VARIABLE_COLUMN: &str = "Jet_pt";

enum Sampler {
    NormalF32(Normal<f32>, Vec<f32>),
    UniformI32(Uniform<i32>, Vec<i32>),
    NormalF64(Normal<f64>, Vec<f64>),
    UniformI64(Uniform<i64>, Vec<i64>),
    TailF32 { len: Poisson<f64>, threshold: f32, tail: Exp<f32>, out: Vec<Vec<f32>> },
    ListI32 { len: Poisson<f64>, values: Uniform<i32>, out: Vec<Vec<i32>> },
}

impl Sampler {
    fn new(gen: Gen) -> Self {
        match gen {
            Gen::NormalF32(m, s) => Sampler::NormalF32(Normal::new(m, s).unwrap(), Vec::new()),
            Gen::UniformI32(lo, hi) => Sampler::UniformI32(Uniform::new_inclusive(lo, hi), Vec::new()),
            Gen::NormalF64(m, s) => Sampler::NormalF64(Normal::new(m, s).unwrap(), Vec::new()),
            Gen::UniformI64(lo, hi) => Sampler::UniformI64(Uniform::new_inclusive(lo, hi), Vec::new()),
            Gen::TailF32 { mean_len, threshold, tail } => Sampler::TailF32 {
                len: Poisson::new(mean_len).unwrap(),
                threshold,
                tail: Exp::new(1.0 / tail).unwrap(),
                out: Vec::new(),
            },
            Gen::ListI32 { mean_len, lo, hi } => Sampler::ListI32 {
                len: Poisson::new(mean_len).unwrap(),
                values: Uniform::new(lo, hi),
                out: Vec::new(),
            },
        }
    }

    fn sample(&mut self, rng: &mut ChaCha8Rng) {
        match self {
            Sampler::NormalF32(d, out) => out.push(d.sample(rng)),
            Sampler::UniformI32(d, out) => out.push(d.sample(rng)),
            Sampler::NormalF64(d, out) => out.push(d.sample(rng)),
            Sampler::UniformI64(d, out) => out.push(d.sample(rng)),
            Sampler::TailF32 { len, threshold, tail, out } => {
                let n = len.sample(rng) as usize;
                out.push((0..n).map(|_| *threshold + tail.sample(rng)).collect());
            }
            Sampler::ListI32 { len, values, out } => {
                let n = len.sample(rng) as usize;
                out.push((0..n).map(|_| values.sample(rng)).collect());
            }
        }
    }

    fn take(&mut self) -> ColumnValues {
        match self {
            Sampler::NormalF32(_, out) => Column::Fixed(std::mem::take(out)).into(),
            Sampler::UniformI32(_, out) => Column::Fixed(std::mem::take(out)).into(),
            Sampler::NormalF64(_, out) => Column::Fixed(std::mem::take(out)).into(),
            Sampler::UniformI64(_, out) => Column::Fixed(std::mem::take(out)).into(),
            Sampler::TailF32 { out, .. } => Column::Variable(std::mem::take(out)).into(),
            Sampler::ListI32 { out, .. } => Column::Variable(std::mem::take(out)).into(),
        }
    }
}

/// Iterator over the batches of a synthetic dataset.
pub struct DatasetStream {
    remaining: usize,
    rng: ChaCha8Rng,
    samplers: Vec<Sampler>,
}

pub fn generate_dataset(kind: DatasetKind, n_events: usize, seed: u64) -> DatasetStream {
    DatasetStream {
        remaining: n_events,
        rng: ChaCha8Rng::seed_from_u64(seed),
        samplers: column_specs(kind).iter().map(|c| Sampler::new(c.gen)).collect(),
    }
}

impl Iterator for DatasetStream {
    type Item = EventBatch;

    fn next(&mut self) -> Option<EventBatch> {
        if self.remaining == 0 {
            return None;
        }
        let n = self.remaining.min(BATCH_EVENTS);
        for _ in 0..n {
            for s in &mut self.samplers {
                s.sample(&mut self.rng);
            }
        }
        self.remaining -= n;
        let columns = self.samplers.iter_mut().map(Sampler::take).collect();
        Some(EventBatch::new(columns).expect("samplers emit one value per event"))
    }
}

/// Renders NanoAOD-like events as JSON text records, one per event. The
/// records share their keys and layout, which makes them a natural training
/// set for dictionary compression.
pub fn event_records(n_events: usize, seed: u64) -> Vec<Vec<u8>> {
    let schema = DatasetKind::NanoAodLike.schema();
    let mut records = Vec::with_capacity(n_events);
    for batch in generate_dataset(DatasetKind::NanoAodLike, n_events, seed) {
        for ev in 0..batch.event_count() {
            let mut s = String::from("{");
            for (i, (col, values)) in schema.columns().iter().zip(batch.columns()).enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "\"{}\":", col.name).unwrap();
                match values {
                    ColumnValues::F32(Column::Fixed(v)) => write!(s, "{:.3}", v[ev]).unwrap(),
                    ColumnValues::I32(Column::Fixed(v)) => write!(s, "{}", v[ev]).unwrap(),
                    ColumnValues::F32(Column::Variable(v)) => {
                        let items: Vec<String> = v[ev].iter().map(|x| format!("{x:.2}")).collect();
                        write!(s, "[{}]", items.join(",")).unwrap();
                    }
                    other => unreachable!("no {:?} columns in nanoaod", other.element_type()),
                }
            }
            s.push('}');
            records.push(s.into_bytes());
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arity, OFFSET_WIDTH};

    fn collect(kind: DatasetKind, n: usize, seed: u64) -> Vec<EventBatch> {
        generate_dataset(kind, n, seed).collect()
    }

    #[test]
    fn schemas_have_documented_shape() {
        let s = DatasetKind::NanoAodLike.schema();
        let count = |t: ElementType, a: Arity| {
            s.columns().iter().filter(|c| c.element_type == t && c.arity == a).count()
        };
        assert_eq!(count(ElementType::F32, Arity::Fixed), 20);
        assert_eq!(count(ElementType::I32, Arity::Fixed), 10);
        assert_eq!(count(ElementType::F32, Arity::Variable), 4);
        assert_eq!(s.len(), 34);

        let f = DatasetKind::FlatNtuple.schema();
        assert_eq!(f.columns().iter().filter(|c| c.element_type == ElementType::F64).count(), 4);
        assert_eq!(f.columns().iter().filter(|c| c.element_type == ElementType::I64).count(), 4);

        let c = DatasetKind::CArray.schema();
        assert_eq!(c.columns(), &[ColumnSchema::variable("hits", ElementType::I32)]);
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        for kind in DatasetKind::ALL {
            let a = collect(kind, 5000, 9);
            let b = collect(kind, 5000, 9);
            assert_eq!(a, b);
            let short = collect(kind, 100, 9);
            for (c, col) in short[0].columns().iter().enumerate() {
                assert_eq!(col, &a[0].columns()[c].slice(0..100));
            }
            assert_ne!(collect(kind, 100, 10), short);
        }
    }

    #[test]
    fn batch_sizes() {
        let sizes: Vec<usize> = generate_dataset(DatasetKind::CArray, 2 * BATCH_EVENTS + 5, 1)
            .map(|b| b.event_count())
            .collect();
        assert_eq!(sizes, [BATCH_EVENTS, BATCH_EVENTS, 5]);
    }

    #[test]
    fn carray_values_in_range() {
        for b in collect(DatasetKind::CArray, 3000, 3) {
            let ColumnValues::I32(Column::Variable(events)) = &b.columns()[0] else {
                panic!("carray column type");
            };
            let mean_len = events.iter().map(Vec::len).sum::<usize>() as f64 / events.len() as f64;
            assert!((mean_len - 20.0).abs() < 1.0, "mean length {mean_len}");
            assert!(events.iter().flatten().all(|&v| (0..1 << 16).contains(&v)));
        }
    }

    #[test]
    fn event_records_are_about_a_kilobyte() {
        let records = event_records(128, 5);
        assert_eq!(records.len(), 128);
        let mean = records.iter().map(Vec::len).sum::<usize>() / records.len();
        assert!((700..1400).contains(&mean), "mean record size {mean}");
        assert!(records.iter().all(|r| r.starts_with(b"{\"MET_pt\":")));
    }

    #[test]
    fn nanoaod_bytes_per_event_matches_schema() {
        // 20 f32 + 10 i32 scalars, 4 lists of Poisson(5) f32 with one offset each
        let expected = 20.0 * 4.0 + 10.0 * 4.0 + 4.0 * (OFFSET_WIDTH as f64 + 5.0 * 4.0);
        assert_eq!(expected, 216.0);
        let n = 10_000;
        let bytes: usize = collect(DatasetKind::NanoAodLike, n, 42).iter().map(EventBatch::serialized_size).sum();
        let mean = bytes as f64 / n as f64;
        assert!((mean - expected).abs() / expected < 0.02, "mean {mean} bytes/event");
    }
}
