// temporary: isolate forest fit cost vs scoring overhead
use iscore::ampute::{ampute_mcar, gen_gaussian};
use iscore::data::FeatureKind;
use iscore::forest::{fit_forest_weighted, ForestParams};
use iscore::data::Table;
use std::time::Instant;
use rand::Rng;

fn main() {
    // typical work-item shape: 320 distinct rows (weights up to ~10), 3 features
    let mut rng = iscore::seed::rng(1, &[1]);
    let n = 320;
    let values: Vec<f64> = (0..n * 3).map(|_| rng.gen::<f64>()).collect();
    let features = Table::from_rows(3, values);
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
    let mult: Vec<u32> = (0..n).map(|i| if i % 7 == 0 { 5 } else { 1 }).collect();
    let kinds = vec![FeatureKind::Numeric; 3];
    let params = ForestParams { seed: 2, ..ForestParams::default() };
    let t = Instant::now();
    let reps = 2000;
    let mut acc = 0.0;
    for k in 0..reps {
        let p = ForestParams { seed: k as u64, ..params.clone() };
        let model = fit_forest_weighted(&features, &labels, &kinds, &mult, &p).unwrap();
        acc += model.predict_prob(&[0.5, 0.5, 0.5]);
    }
    println!("fit_forest_weighted 320x3 x{reps}: {:?} ({:.3} ms each), acc {acc:.1}", t.elapsed(), t.elapsed().as_secs_f64() * 1e3 / reps as f64);

    // the same via dr_iscore machinery for comparison
    let truth = gen_gaussian(500, 4, 0.7, 1);
    let mask = ampute_mcar(&truth, 0.2, 2).unwrap().matrix;
    let imp = iscore::impute::impute_mean(&mask, 1, 3).unwrap();
    let sp = iscore::score::ScoreParams { seed: 3, ..Default::default() };
    let cl = iscore::score::ForestClassifier::from_params(&sp);
    let t = Instant::now();
    let rep = iscore::score::dr_iscore(&mask, &imp, &sp, &cl).unwrap();
    println!("dr_iscore mean N=1: {:?} used={} -> per-50-proj-unit", t.elapsed(), rep.n_projections_used);
}
