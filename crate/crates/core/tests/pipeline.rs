use std::collections::BTreeSet;

use mmpm::pipeline::{self, IngestArgs, Workspace};
use mmpm::synthgen::{default_plants, SynthConfig};
use mmpm::transactions::TransactionStore;
use mmpm::Error;

#[test]
fn synthetic_plants_are_recovered_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = Workspace::open(dir.path(), None).unwrap();
    let manifest = pipeline::synth(&mut ws, &default_plants(), &SynthConfig::default()).unwrap();
    let ws = Workspace::open(dir.path(), None).unwrap();
    assert_eq!(ws.config.clusters, manifest.recommended_clusters);

    pipeline::ingest(&ws, &IngestArgs::default()).unwrap();
    pipeline::cluster(&ws).unwrap();
    pipeline::transact(&ws).unwrap();
    let patterns = pipeline::mine_stage(&ws).unwrap();
    let names = pipeline::name_stage(&ws).unwrap();
    let summary = pipeline::classify(&ws).unwrap();
    let counts = pipeline::report(&ws).unwrap();

    let store = TransactionStore::load(&ws.path(pipeline::TRANSACTIONS)).unwrap();
    let space = *store.space().unwrap();
    for plant in &manifest.plants {
        let planted: Vec<u32> = plant.spec.visual_items.iter().map(|&v| space.visual_item(v)).collect();
        for doc in &plant.carrier_docs {
            assert!(
                store
                    .transactions()
                    .iter()
                    .any(|t| &t.doc_id == doc && planted.iter().all(|i| t.contains(*i))),
                "carrier {doc} lost its planted filters"
            );
        }
    }

    let found: BTreeSet<(u32, Vec<u32>)> = patterns.iter().map(|p| (p.event, p.visual_items.clone())).collect();
    for plant in &manifest.plants {
        assert!(
            found.contains(&(plant.spec.event, plant.spec.visual_items.clone())),
            "plant {:?} not mined; got {:?}",
            plant.spec,
            found
        );
    }
    let named: BTreeSet<&str> = names.iter().filter_map(|n| n.name.as_deref()).collect();
    for plant in &manifest.plants {
        assert!(named.contains(plant.gram.as_str()), "missing name {}; got {:?}", plant.gram, named);
    }
    assert_eq!(counts.iter().map(|c| c.patterns).sum::<usize>(), patterns.len());
    assert!(summary.train_accuracy > 0.0);
    assert!(ws.path(pipeline::REPORT).exists());
}

#[test]
fn stages_report_missing_prerequisites() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(dir.path(), None).unwrap();
    match pipeline::mine_stage(&ws) {
        Err(Error::MissingStage { stage, .. }) => assert_eq!(stage, "transact"),
        other => panic!("unexpected {other:?}"),
    }
    let msg = pipeline::cluster(&ws).unwrap_err().to_string();
    assert!(msg.contains("run `ingest` first"), "{msg}");
}
