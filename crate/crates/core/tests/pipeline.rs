use std::collections::BTreeMap;

use reclink::data::{
    generate_synthetic, load_dataset, load_pairs, write_network, write_pairs, write_profiles, SynthField,
    SyntheticSpec, SyntheticDataset,
};
use reclink::estimator::{
    binder_point_estimate, match_probabilities, mpmms_point_estimate, population_size_posterior,
};
use reclink::evaluation::{confusion, precision_recall_f1, CriterionReport, UnitSubset};
use reclink::model::{HyperConfig, HyperParams};
use reclink::sampler::{read_linkage_samples, write_linkage_samples};
use reclink::{run_chain, FieldKind, LikelihoodTerms, Model, SamplerConfig};

fn simulated() -> SyntheticDataset {
    generate_synthetic(&SyntheticSpec {
        file_sizes: vec![25, 22],
        n_latent: Some(35),
        match_fraction: 0.0,
        fields: vec![
            SynthField {
                name: "city".into(),
                kind: FieldKind::Categorical,
                levels: 40,
                psi: 0.02,
            },
            SynthField {
                name: "name".into(),
                kind: FieldKind::StringValued,
                levels: 40,
                psi: 0.02,
            },
        ],
        k: 2,
        beta: vec![0.5, 0.5],
        sigma2: 1.0,
        distinct_profiles: true,
        seed: 21,
    })
    .unwrap()
}

#[test]
fn files_round_trip_and_the_chain_recovers_the_pairs() {
    let syn = simulated();
    let data = &syn.dataset;
    let dir = tempfile::tempdir().unwrap();
    let mut profiles = Vec::new();
    let mut networks = Vec::new();
    for j in 0..2 {
        let p = dir.path().join(format!("profiles_{j}.csv"));
        write_profiles(&p, &data.profiles[j], &data.fields).unwrap();
        profiles.push(p);
        let n = dir.path().join(format!("network_{j}.txt"));
        write_network(&n, &data.networks[j]).unwrap();
        networks.push(n);
    }
    let truth_path = dir.path().join("truth.csv");
    write_pairs(&truth_path, syn.truth.pairs()).unwrap();

    let kinds = BTreeMap::from([("name".to_string(), FieldKind::StringValued)]);
    let loaded = load_dataset(&profiles, &networks, &kinds, None).unwrap();
    assert_eq!(loaded.file_sizes(), data.file_sizes());
    for j in 0..2 {
        assert_eq!(loaded.networks[j].edges(), data.networks[j].edges());
    }
    for r in 0..data.n_records() {
        for f in 0..data.n_fields() {
            let a = data.cell(r, f).map(|l| &data.fields[f].levels[l]);
            let b = loaded.cell(r, f).map(|l| &loaded.fields[f].levels[l]);
            assert_eq!(a, b);
        }
    }
    let truth = load_pairs(&truth_path, &loaded.file_sizes()).unwrap();
    assert_eq!(truth.pairs(), syn.truth.pairs());

    let hyper = HyperParams::resolve(&loaded, 2, &HyperConfig::default()).unwrap();
    let model = Model::new(&loaded, hyper, LikelihoodTerms::ALL).unwrap();
    let config = SamplerConfig {
        iterations: 3000,
        burn_in: 1000,
        thin: 5,
        seed: 4,
        store_pointwise: true,
        ..Default::default()
    };
    let (samples, diag) = run_chain(&model, &config, None).unwrap();
    assert_eq!(samples.labels.len(), 400);
    assert_eq!(samples.pointwise.n_samples(), 400);
    assert!(diag.acceptance.linkage > 0.0);

    let table = match_probabilities(&samples.labels, &loaded).unwrap();
    for &(a, b) in truth.pairs() {
        assert!(table.get(a, b) > 0.5, "true pair {a:?} {b:?} has p = {}", table.get(a, b));
    }
    for est in [
        binder_point_estimate(&table, 1.0).unwrap(),
        mpmms_point_estimate(&samples.labels, &loaded).unwrap(),
    ] {
        let m = precision_recall_f1(&confusion(&est.pairs, &truth, &loaded).unwrap());
        assert!(m.f1.unwrap() >= 0.9, "{:?}: {m:?}", est.estimator);
    }
    let pop = population_size_posterior(&samples.labels).unwrap();
    assert!((pop.mean - 35.0).abs() < 2.0, "E[N] = {}", pop.mean);
    assert_eq!(pop.histogram.values().sum::<usize>(), 400);

    let report = CriterionReport::new(2, &samples.pointwise, UnitSubset::All).unwrap();
    assert!(report.waic.is_finite() && report.dic.is_finite());
    assert!(report.p_waic >= 0.0);

    let path = dir.path().join("samples.txt");
    write_linkage_samples(&path, &samples).unwrap();
    assert_eq!(read_linkage_samples(&path).unwrap(), samples.labels);
}

#[test]
fn network_only_data_need_sizes() {
    let syn = simulated();
    let dir = tempfile::tempdir().unwrap();
    let mut networks = Vec::new();
    for j in 0..2 {
        let n = dir.path().join(format!("network_{j}.txt"));
        write_network(&n, &syn.dataset.networks[j]).unwrap();
        networks.push(n);
    }
    let none: &[std::path::PathBuf] = &[];
    assert!(load_dataset(none, &networks, &BTreeMap::new(), None).is_err());
    let d = load_dataset(none, &networks, &BTreeMap::new(), Some(&[25, 22])).unwrap();
    assert_eq!(d.n_fields(), 0);
    assert_eq!(d.n_records(), 47);
    // an actor index past the declared size is rejected
    assert!(load_dataset(none, &networks, &BTreeMap::new(), Some(&[3, 3])).is_err());
}
