use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use proofpath_core::rng::stream;
use proofpath_core::*;

const RULE_A: &str = "!KU( aenc(<'2', ~ni.1, nr.1, $R.1>, pk(~ltkA.1))) @ #vk.1";
const RULE_B: &str = "St_R_1_in_nonce(~ni, $A, $R) @ #t2";

fn loop_path(len: usize) -> Vec<String> {
    (0..len).map(|k| format!("!KU( aenc(<'2', ~ni.{k}, nr.{k}, $R.{k}>, pk(~ltkA.{k}))) @ #vk.{k}")).collect()
}

fn bench_edit_distance(c: &mut Criterion) {
    c.bench_function("edit_distance/rule_pair", |b| b.iter(|| edit_distance(RULE_A, RULE_B)));
}

fn bench_detect_loop(c: &mut Criterion) {
    let cfg = LoopDetectorConfig::default();
    let path = loop_path(40);
    c.bench_function("detect_loop/batch_40", |b| b.iter(|| detect_loop(&path, &cfg)));
    c.bench_function("detect_loop/incremental_40", |b| {
        b.iter(|| {
            let mut det = PathLoopDetector::new(cfg);
            for rule in &path {
                det.push(rule);
            }
            det.detect()
        })
    });
}

fn bench_train_step(c: &mut Criterion) {
    let cfg = DqnConfig { batch: 512, ..DqnConfig::default() };
    let featurizer = cfg.featurizer();
    let rules = loop_path(64);
    let mut memory = ReplayMemory::new(cfg.capacity);
    for (i, rule) in rules.iter().enumerate() {
        let node = RuleNode::new(rule.as_str(), i).unwrap();
        let state = featurizer.featurize(&node, i % 2, 30).unwrap();
        memory.push(Transition { state, action: i % 2, reward: -10.0, next: None });
    }
    let net = QNetwork::new(&cfg, &mut stream(1, "qnet", &[]));
    c.bench_function("train_step/64_transitions", |b| {
        b.iter_batched(
            || (net.clone(), stream(1, "replay", &[])),
            |(mut net, mut rng)| net.train_step(&memory, cfg.batch, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_dfs(c: &mut Criterion) {
    let factory = SyntheticFactory::new(SyntheticSpec { correct_depth: 10, decoy_delay: 3, ..SyntheticSpec::default() });
    let cfg = LoopDetectorConfig::default();
    c.bench_function("dfs/depth10_delay3", |b| {
        b.iter(|| dfs_search(&factory, &cfg, &NodeOrder::FirstListed, Limits::default()).unwrap().coverage)
    });
}

fn bench_theorem(c: &mut Criterion) {
    c.bench_function("theorem/sweep_20", |b| b.iter(|| sweep(3, 20).unwrap().instances.len()));
}

criterion_group!(benches, bench_edit_distance, bench_detect_loop, bench_train_step, bench_dfs, bench_theorem);
criterion_main!(benches);
