use autothorax::checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
use autothorax::manifest::{parse_manifest, serialize_manifest};
use autothorax::store::{decode_store, encode_store, read_store, write_store, STORE_HEADER_LEN};
use autothorax_core::data::{DatasetManifest, DatasetMode, FeatureConfig, FeatureVector, Finding, ImageRecord, Source};
use autothorax_core::nn::{Activation, Network};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vectors(rng: &mut ChaCha8Rng) -> Vec<FeatureVector> {
    let config = [FeatureConfig::C1, FeatureConfig::C2, FeatureConfig::C3, FeatureConfig::Encoded][rng.gen_range(0..4)];
    let dim = config.blocks().max(1) * rng.gen_range(1..40);
    let count = rng.gen_range(1..30);
    let extractor = format!("ext-{}", rng.gen::<u16>());
    (0..count)
        .map(|i| {
            // Raw bit patterns hit subnormals and signed zeros too.
            let values = (0..dim)
                .map(|_| loop {
                    let v = f32::from_bits(rng.gen());
                    if v.is_finite() {
                        break v;
                    }
                })
                .collect();
            FeatureVector::new(format!("rec {i}/{}", rng.gen::<u32>()), values, config, extractor.clone()).unwrap()
        })
        .collect()
}

#[test]
fn store_write_read_write_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..100 {
        let vectors = random_vectors(&mut rng);
        let path = dir.path().join(format!("{case}.fvs"));
        write_store(&vectors, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = read_store(&path).unwrap();
        assert_eq!(back.len(), vectors.len());
        for (a, b) in back.iter().zip(&vectors) {
            assert_eq!(a.record_id, b.record_id);
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        write_store(&back, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first, "case {case}");
        assert_eq!(encode_store(&decode_store(&first).unwrap()).unwrap(), first);
    }
}

#[test]
fn store_rejects_damage() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vectors = random_vectors(&mut rng);
    assert!(encode_store(&[]).is_err());
    let bytes = encode_store(&vectors).unwrap();
    for cut in [0, 7, STORE_HEADER_LEN - 1, STORE_HEADER_LEN, bytes.len() - 1] {
        assert!(decode_store(&bytes[..cut]).is_err(), "cut {cut}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_store(&extra).is_err());
    let mut magic = bytes;
    magic[0] ^= 1;
    assert!(decode_store(&magic).is_err());
}

fn random_network(rng: &mut ChaCha8Rng) -> Network<f32> {
    let acts = [Activation::Relu, Activation::Sigmoid, Activation::Linear];
    let depth = rng.gen_range(1..5);
    let dims: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..24)).collect();
    let activations: Vec<Activation> = (0..depth).map(|_| acts[rng.gen_range(0..3)]).collect();
    Network::init(&dims, &activations, rng.gen_range(0.0..0.9), rng).unwrap()
}

#[test]
fn checkpoint_write_read_write_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let net = random_network(&mut rng);
        let path = dir.path().join(format!("{case}.axnn"));
        save_checkpoint(&net, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, net, "case {case}");
        save_checkpoint(&back, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first, "case {case}");
    }
}

#[test]
fn checkpoint_detects_any_flipped_byte() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bytes = encode_checkpoint(&random_network(&mut rng));
    for i in (0..bytes.len()).step_by(7) {
        let mut bad = bytes.clone();
        bad[i] ^= 0x10;
        assert!(decode_checkpoint(&bad).is_err(), "byte {i}");
    }
}

fn record_strategy() -> impl Strategy<Value = (String, String, u8, u8, Option<u8>)> {
    (
        "[a-zA-Z0-9_.-]{1,12}",
        "[a-zA-Z0-9_ ,\"/.-]{0,20}",
        0u8..3,
        0u8..4,
        proptest::option::of(0u8..10),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifest_round_trip(rows in proptest::collection::vec(record_strategy(), 0..40)) {
        let findings = [Finding::Pneumothorax, Finding::NoFinding, Finding::Other];
        let mut seen = std::collections::BTreeSet::new();
        let records: Vec<ImageRecord> = rows
            .into_iter()
            .filter(|r| seen.insert(r.0.clone()))
            .map(|(id, path, f, s, fold)| {
                let mut r = ImageRecord::new(id, path, findings[usize::from(f)], Source::ALL[usize::from(s)]);
                r.fold = fold;
                r
            })
            .collect();
        let m = DatasetManifest::new(records, DatasetMode::FullyAutomated).unwrap();
        let text = serialize_manifest(&m);
        let back = parse_manifest(&text).unwrap();
        prop_assert_eq!(back.records(), m.records());
        prop_assert_eq!(serialize_manifest(&back), text);
    }
}
