mod common;

use common::Instance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ring_rpq::dictionary::running_example;
use ring_rpq::engine::{evaluate, EngineConfig};
use ring_rpq::index::Index;
use ring_rpq::persist::{from_bytes, load, save, to_bytes, PersistError};
use ring_rpq::syntax::parse;

#[test]
fn reloaded_index_answers_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let config = EngineConfig {
        timeout: None,
        ..EngineConfig::default()
    };
    for _ in 0..120 {
        let inst = Instance::random(&mut rng, 6);
        let built = inst.graph.index();
        let bytes = to_bytes(&built);
        let loaded = from_bytes(&bytes).unwrap();
        assert_eq!(to_bytes(&loaded), bytes);
        let q = parse(&inst.query()).unwrap();
        let (a, ra) = evaluate(&built, &q, &config).unwrap();
        let (b, rb) = evaluate(&loaded, &q, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.solutions, rb.solutions);
        assert_eq!(ra.counters, rb.counters);
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.idx");
    let index = Index::build(running_example()).unwrap();
    let report = save(&index, &path).unwrap();
    assert_eq!(report.total_bytes, std::fs::metadata(&path).unwrap().len());
    assert_eq!(load(&path).unwrap(), index);
    assert!(matches!(
        load(&dir.path().join("missing")),
        Err(PersistError::Io(_))
    ));
}

#[test]
fn every_single_byte_corruption_is_rejected() {
    let bytes = to_bytes(&Index::build(running_example()).unwrap());
    for i in 0..bytes.len() {
        for flip in [0x01u8, 0x80] {
            let mut bad = bytes.clone();
            bad[i] ^= flip;
            assert!(
                from_bytes(&bad).is_err(),
                "flip {flip:#x} at byte {i} accepted"
            );
        }
    }
    for cut in [0, 3, 11, 19, bytes.len() / 2, bytes.len() - 1] {
        assert!(from_bytes(&bytes[..cut]).is_err());
    }
}
