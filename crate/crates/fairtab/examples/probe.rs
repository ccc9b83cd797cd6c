// Scratch diagnostic: distillation fidelity and margin scales per stage.

use fairtab::dataio::*;
use fairtab::distill::*;
use fairtab::fusion::*;
use fairtab::metrics::pearson;
use fairtab::rng;
use fairtab::trees::*;

fn main() {
    let synth: SynthConfig = serde_json::from_str(
        &std::fs::read_to_string(std::env::args().nth(1).unwrap()).unwrap(),
    )
    .unwrap();
    let cohort = impute_missing(&synth_generate(&synth).unwrap());
    let n = cohort.n_rows();
    let rows: Vec<usize> = (0..n).collect();
    let train: Vec<usize> = rows.iter().copied().filter(|r| r % 5 != 0).collect();
    let test: Vec<usize> = rows.iter().copied().filter(|r| r % 5 == 0).collect();

    let config = TrainConfig::default();
    let gbdt = GbdtParams {
        n_trees: 40,
        max_depth: 4,
        min_samples_leaf: 10,
        ..GbdtParams::default()
    };
    let fit = fit_fold(&cohort, &train, 0, &config, &gbdt, None).unwrap();

    // teacher vs student margins on held-out rows
    let mut teacher_margins = Vec::new();
    let mut student_margins = Vec::new();
    for &r in &test {
        teacher_margins
            .push(predict_margin(&fit.teacher, fit.views.dense_row(r)).unwrap());
        let mut dense = fit.views.dense_row(r).to_vec();
        fit.standardizer.transform_row(&mut dense);
        student_margins.push(fit.model.distilled.y_kd(&dense).unwrap());
    }
    let corr = pearson(&teacher_margins, &student_margins).unwrap();
    let scale = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    };
    println!("fidelity corr       : {corr:.4}");
    println!("teacher margin std  : {:.4}", scale(&teacher_margins));
    println!("student margin std  : {:.4}", scale(&student_margins));
    println!("w1 {:.4} w2 {:.4}", fit.model.w1.data[0], fit.model.w2.data[0]);
    println!("distill log mse last: {:?}", fit.distill_log.groups.iter().map(|g| *g.epoch_mse.last().unwrap()).collect::<Vec<_>>());
    println!("e2e ce curve        : {:?}", fit.train_log.epoch_ce);

    // leaf-embedding reconstruction quality per group
    let d = fit.views.d_cols;
    let mut x_raw = Vec::with_capacity(train.len() * d);
    for &r in &train {
        x_raw.extend_from_slice(fit.views.dense_row(r));
    }
    let dist = prepare_distillation(&fit.teacher, &x_raw, train.len(), config.n_groups).unwrap();
    for (g, group) in dist.groups.iter().enumerate() {
        let params = DistillParams {
            seed: rng::derive(config.seed, "fold0/distill"),
            ..DistillParams::default()
        };
        let emb = fit_leaf_embedding(
            group,
            &dist.leaf_slots[g],
            &dist.group_margins[g],
            &params,
            &mut rng::stream(params.seed, &format!("leafemb{g}")),
        )
        .unwrap();
        let var = scale(&dist.group_margins[g]).powi(2);
        println!(
            "group {g}: leaf_dim {} emb mse {:.5} margin var {:.5}",
            group.leaf_dim, emb.final_mse, var
        );
    }
}
