use std::time::Instant;
use tacspike::aer::*;
use tacspike::sim::*;
use tacspike::snn::*;

#[test]
fn bench_pipeline() {
    let sensor = SensorModel::default();
    let field = TextureField::standard(10).unwrap();
    let motion = MotionProfile::fixed_condition(MotionKind::Slide);

    let t0 = Instant::now();
    let n_sim = 20;
    let mut streams = Vec::new();
    for seed in 0..n_sim {
        streams.push(simulate_trial(&field, &sensor, &TrialSpec { texture_id: 10, motion, seed }).unwrap());
    }
    println!("simulate_trial: {:.1} ms/trial ({} events avg)",
        t0.elapsed().as_secs_f64() * 1000.0 / n_sim as f64,
        streams.iter().map(|s| s.len()).sum::<usize>() / streams.len());

    let t0 = Instant::now();
    let tensors: Vec<SpikeTensor> = streams.iter().map(|s| {
        let c = crop(s, &CropSpec::default()).unwrap();
        let p = pool(&c, &PoolGrid::default()).unwrap();
        bin(&p, 1000, 1000).unwrap().tensor
    }).collect();
    println!("preprocess: {:.1} ms/trial", t0.elapsed().as_secs_f64() * 1000.0 / n_sim as f64);

    let spec = NetworkSpec::default_arch(1000, 1, 10);
    let plan = compile(&spec).unwrap();
    let params = Parameters::init(&plan, 1);

    let t0 = Instant::now();
    for t in &tensors {
        let out = forward(&plan, &params, std::slice::from_ref(t)).unwrap();
        std::hint::black_box(out.scores);
    }
    println!("forward: {:.1} ms/trial", t0.elapsed().as_secs_f64() * 1000.0 / n_sim as f64);

    // spike stats
    let out = forward(&plan, &params, std::slice::from_ref(&tensors[0])).unwrap();
    for (name, counts) in out.trace.source_names.iter().zip(&out.trace.spike_counts) {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        println!("  {}: {} spikes/trial", name, total);
    }
    println!("  synops: {:?} total {}", out.trace.synops, count_synops(&out.trace).total);

    let surrogate = SurrogateSpec::default();
    let batch: Vec<(&[SpikeTensor], usize)> = tensors[..8].iter().map(|t| (std::slice::from_ref(t), 10usize)).collect();
    let t0 = Instant::now();
    let (_loss, _g) = loss_and_grads(&plan, &params, &surrogate, &batch, false).unwrap();
    println!("fwd+bwd: {:.1} ms/sample", t0.elapsed().as_secs_f64() * 1000.0 / 8.0);
}

#[test]
fn probe_active() {
    let sensor = SensorModel::default();
    let field = TextureField::standard(10).unwrap();
    let motion = MotionProfile::fixed_condition(MotionKind::Slide);
    let stream = simulate_trial(&field, &sensor, &TrialSpec { texture_id: 10, motion, seed: 0 }).unwrap();
    let c = crop(&stream, &CropSpec::default()).unwrap();
    let p = pool(&c, &PoolGrid::default()).unwrap();
    let tensor = bin(&p, 1000, 1000).unwrap().tensor;

    let spec = NetworkSpec::default_arch(1000, 1, 10);
    let plan = compile(&spec).unwrap();
    let params = Parameters::init(&plan, 1);
    let out = forward_with(&plan, &params, std::slice::from_ref(&tensor),
        ForwardOptions { record_positions: false, record_membranes: true }).unwrap();
    let membranes = out.trace.membranes.unwrap();
    for (li, layer) in membranes.iter().enumerate() {
        let mut active = 0usize;
        let mut total = 0usize;
        for step in layer {
            // membrane AFTER reset; u before reset differs, but this approximates the band
            active += step.iter().filter(|&&v| (v - 1.0).abs() <= 0.5 || v >= 0.5).count();
            total += step.len();
        }
        println!("if{}: ~band fraction {:.3}", li + 1, active as f64 / total as f64);
    }
}

#[test]
fn full_scale_slide() {
    use std::time::Instant;
    let sensor = SensorModel::default();
    let per_class = 100usize;

    let t0 = Instant::now();
    let mut items = Vec::new();
    let mut test_items = Vec::new();
    for id in 1..=10u8 {
        let field = TextureField::standard(id).unwrap();
        for k in 0..per_class {
            let motion = MotionProfile::fixed_condition(MotionKind::Slide);
            let spec = TrialSpec { texture_id: id, motion, seed: (id as u64) * 100000 + k as u64 };
            let stream = simulate_trial(&field, &sensor, &spec).unwrap();
            let c = crop(&stream, &CropSpec::default()).unwrap();
            let p = pool(&c, &PoolGrid::default()).unwrap();
            let tensor = bin(&p, 1000, 1000).unwrap().tensor;
            if k < 80 {
                let clipped = clip(&tensor, 500).unwrap();
                items.push(TrainItem { channels: vec![clipped], class: id as usize });
            } else {
                test_items.push((tensor, id as usize));
            }
        }
    }
    println!("data gen: {:.1}s ({} train / {} test)", t0.elapsed().as_secs_f64(), items.len(), test_items.len());

    let spec = NetworkSpec::default_arch(1000, 1, 10);
    let plan = compile(&spec).unwrap();
    let hp = Hyperparams {
        lr: 3e-3, epochs: 5, batch_size: 8, seed: 1, val_fraction: 0.08,
        surrogate: SurrogateSpec { kind: SurrogateKind::Boxcar, param: 0.5 },
        ..Default::default()
    };
    let t0 = Instant::now();
    let out = train(&plan, &items, &hp).unwrap();
    println!("train: {:.1}s diverged={} best_epoch={}", t0.elapsed().as_secs_f64(), out.diverged, out.best_epoch);
    for l in &out.log {
        println!("  epoch {} {}: loss {:.4} acc {:.3}", l.epoch, l.split.name(), l.loss, l.accuracy);
    }
    let t0 = Instant::now();
    let mut correct = 0;
    for (tensor, class) in &test_items {
        if predict(&plan, &out.params, std::slice::from_ref(tensor)).unwrap() == *class {
            correct += 1;
        }
    }
    println!("TEST accuracy (full length): {:.3} ({:.1}s)", correct as f64 / test_items.len() as f64, t0.elapsed().as_secs_f64());
}

#[test]
fn mini_train2() {
    use std::time::Instant;
    let sensor = SensorModel::default();
    let per_class = 30usize;

    let t0 = Instant::now();
    let mut items = Vec::new();
    let mut test_items = Vec::new();
    for id in 1..=10u8 {
        let field = TextureField::standard(id).unwrap();
        for k in 0..per_class {
            let motion = MotionProfile::fixed_condition(MotionKind::Slide);
            let spec = TrialSpec { texture_id: id, motion, seed: (id as u64) * 10000 + k as u64 };
            let stream = simulate_trial(&field, &sensor, &spec).unwrap();
            let c = crop(&stream, &CropSpec::default()).unwrap();
            let p = pool(&c, &PoolGrid::default()).unwrap();
            let tensor = bin(&p, 1000, 1000).unwrap().tensor;
            if k < (per_class * 4) / 5 {
                let clipped = clip(&tensor, 500).unwrap();
                items.push(TrainItem { channels: vec![clipped], class: id as usize });
            } else {
                test_items.push((tensor, id as usize));
            }
        }
    }
    println!("data gen: {:.1}s ({} train / {} test)", t0.elapsed().as_secs_f64(), items.len(), test_items.len());

    let spec = NetworkSpec::default_arch(1000, 1, 10);
    let plan = compile(&spec).unwrap();
    let hp = Hyperparams {
        lr: 3e-3, epochs: 6, batch_size: 12, seed: 1, val_fraction: 0.1,
        surrogate: SurrogateSpec { kind: SurrogateKind::Boxcar, param: 0.5 },
        ..Default::default()
    };
    let t0 = Instant::now();
    let out = train(&plan, &items, &hp).unwrap();
    println!("train: {:.1}s diverged={} best_epoch={}", t0.elapsed().as_secs_f64(), out.diverged, out.best_epoch);
    for l in &out.log {
        println!("  epoch {} {}: loss {:.4} acc {:.3}", l.epoch, l.split.name(), l.loss, l.accuracy);
    }
    let t0 = Instant::now();
    let mut correct = 0;
    for (tensor, class) in &test_items {
        if predict(&plan, &out.params, std::slice::from_ref(tensor)).unwrap() == *class {
            correct += 1;
        }
    }
    println!("test accuracy (full length): {:.3} ({:.1}s)", correct as f64 / test_items.len() as f64, t0.elapsed().as_secs_f64());
}

#[test]
fn mini_train() {
    use std::time::Instant;
    let sensor = SensorModel::default();
    let motion_kind = MotionKind::Slide;
    let per_class = 12usize;

    let t0 = Instant::now();
    let mut items = Vec::new();
    for id in 1..=10u8 {
        let field = TextureField::standard(id).unwrap();
        for k in 0..per_class {
            let motion = MotionProfile::fixed_condition(motion_kind);
            let spec = TrialSpec { texture_id: id, motion, seed: (id as u64) * 1000 + k as u64 };
            let stream = simulate_trial(&field, &sensor, &spec).unwrap();
            let c = crop(&stream, &CropSpec::default()).unwrap();
            let p = pool(&c, &PoolGrid::default()).unwrap();
            let tensor = bin(&p, 1000, 1000).unwrap().tensor;
            items.push(TrainItem { channels: vec![tensor], class: id as usize });
        }
    }
    println!("data gen: {:.1}s for {} items", t0.elapsed().as_secs_f64(), items.len());

    for width in [0.5f64, 0.25] {
        let spec = NetworkSpec::default_arch(1000, 1, 10);
        let plan = compile(&spec).unwrap();
        let hp = Hyperparams {
            lr: 2e-3, epochs: 4, batch_size: 10, seed: 1, val_fraction: 0.15,
            surrogate: SurrogateSpec { kind: SurrogateKind::Boxcar, param: width },
            ..Default::default()
        };
        let t0 = Instant::now();
        let out = train(&plan, &items, &hp).unwrap();
        println!("width {width}: {:.1}s, diverged={}", t0.elapsed().as_secs_f64(), out.diverged);
        for l in &out.log {
            println!("  epoch {} {}: loss {:.4} acc {:.3}", l.epoch, l.split.name(), l.loss, l.accuracy);
        }
    }
}

#[test]
fn check_features() {
    println!("avx2={} fma={} avx512f={}",
        cfg!(target_feature = "avx2"),
        cfg!(target_feature = "fma"),
        cfg!(target_feature = "avx512f"));
}
