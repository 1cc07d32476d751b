use std::collections::HashMap;

use basketio::bench::{generate_dataset, DatasetKind};
use basketio::reader::ByteSource;
use basketio::writer::uniform_settings;
use basketio::{
    BasketWriter, CodecId, ColumnSettings, ColumnValues, CompressionSettings, EventBatch, FlushPolicy, PrecondId,
    ReaderHandle,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CODECS: [(CodecId, i32); 5] = [
    (CodecId::Raw, 0),
    (CodecId::Deflate, 6),
    (CodecId::Lz4, 1),
    (CodecId::Lzma, 6),
    (CodecId::Zstd, 3),
];
const POLICIES: [FlushPolicy; 2] = [
    FlushPolicy::PerBasket { max_basket_bytes: 32 * 1024 },
    FlushPolicy::OnlyAtCluster { events_per_cluster: 1000 },
];

fn write_bytes(batches: &[EventBatch], kind: DatasetKind, settings: ColumnSettings, policy: FlushPolicy) -> Vec<u8> {
    let schema = kind.schema();
    let settings = uniform_settings(&schema, &settings);
    let mut w = BasketWriter::new(Vec::new(), schema, &settings, policy).unwrap();
    for b in batches {
        w.append_events(b).unwrap();
    }
    w.finish().unwrap().1
}

fn open(bytes: Vec<u8>) -> ReaderHandle {
    let source: Box<dyn ByteSource> = Box::new(bytes);
    ReaderHandle::from_source(source, &HashMap::new()).unwrap()
}

/// Concatenates the batches column by column.
fn expected_columns(batches: &[EventBatch]) -> Vec<ColumnValues> {
    let mut cols: Vec<ColumnValues> = batches[0].columns().to_vec();
    for b in &batches[1..] {
        for (acc, c) in cols.iter_mut().zip(b.columns()) {
            acc.extend(c.clone());
        }
    }
    cols
}

#[test]
fn every_codec_precond_and_policy_round_trips() {
    for kind in DatasetKind::ALL {
        let batches: Vec<EventBatch> = generate_dataset(kind, 2500, 11).collect();
        let expected = expected_columns(&batches);
        for (codec, level) in CODECS {
            for precond in PrecondId::ALL {
                for policy in POLICIES {
                    let settings = ColumnSettings::new(CompressionSettings::new(codec, level).unwrap(), precond);
                    let reader = open(write_bytes(&batches, kind, settings, policy));
                    assert_eq!(reader.total_events(), 2500);
                    for (c, want) in expected.iter().enumerate() {
                        let got = reader.read_column(c, 0..2500).unwrap();
                        assert!(
                            &got == want,
                            "{kind} column {c} {codec}:{level} {precond} {} differs",
                            policy.label()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn random_ranges_agree_with_full_read() {
    let batches: Vec<EventBatch> = generate_dataset(DatasetKind::NanoAodLike, 5000, 3).collect();
    let settings = ColumnSettings::new(CompressionSettings::new(CodecId::Zstd, 3).unwrap(), PrecondId::Shuffle);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for policy in POLICIES {
        let reader = open(write_bytes(&batches, DatasetKind::NanoAodLike, settings.clone(), policy));
        let ncols = reader.footer().columns().len();
        let full: Vec<ColumnValues> = (0..ncols).map(|c| reader.read_column(c, 0..5000).unwrap()).collect();
        for _ in 0..500 {
            let c = rng.gen_range(0..ncols);
            let a = rng.gen_range(0..=5000u64);
            let b = rng.gen_range(0..=5000u64);
            let range = a.min(b)..a.max(b);
            let got = reader.read_column(c, range.clone()).unwrap();
            assert_eq!(got.event_count() as u64, range.end - range.start);
            assert_eq!(got, full[c].slice(range.start as usize..range.end as usize));
        }
    }
}

#[test]
fn straddling_cluster_boundary_is_seamless() {
    let batches: Vec<EventBatch> = generate_dataset(DatasetKind::CArray, 3000, 5).collect();
    let settings = ColumnSettings::new(CompressionSettings::new(CodecId::Lz4, 1).unwrap(), PrecondId::BitShuffle);
    let reader = open(write_bytes(&batches, DatasetKind::CArray, settings, POLICIES[1]));
    let full = reader.read_column(0, 0..3000).unwrap();
    let mut pieces = reader.read_column(0, 990..1000).unwrap();
    pieces.extend(reader.read_column(0, 1000..1010).unwrap());
    assert_eq!(pieces, full.slice(990..1010));
    assert_eq!(reader.read_column(0, 990..1010).unwrap(), full.slice(990..1010));
}

#[test]
fn empty_range_is_empty() {
    let batches: Vec<EventBatch> = generate_dataset(DatasetKind::FlatNtuple, 100, 5).collect();
    let reader = open(write_bytes(&batches, DatasetKind::FlatNtuple, ColumnSettings::default(), POLICIES[1]));
    for c in 0..8 {
        assert_eq!(reader.read_column(c, 40..40).unwrap().event_count(), 0);
    }
}

#[test]
fn concurrent_reads_on_distinct_columns() {
    let batches: Vec<EventBatch> = generate_dataset(DatasetKind::NanoAodLike, 3000, 8).collect();
    let expected = expected_columns(&batches);
    let reader = open(write_bytes(&batches, DatasetKind::NanoAodLike, ColumnSettings::default(), POLICIES[0]));
    std::thread::scope(|s| {
        for (c, want) in expected.iter().enumerate() {
            let reader = &reader;
            s.spawn(move || assert_eq!(&reader.read_column(c, 0..3000).unwrap(), want));
        }
    });
}
