use teamcoach_core::compat::{evaluate_team_value, ValueConfig};
use teamcoach_core::domains::{build_rescue, build_tiny, Domain, Rescue};
use teamcoach_core::filter::MentalStateFilter;
use teamcoach_core::learner::{fit, LearnerConfig};
use teamcoach_core::model::{AgentBehaviorModel, RewardTable, TableBuilder, TaskModel};
use teamcoach_core::synthetic::{generate_dataset, GroundTruthTeam};

fn learned(domain: &Domain, demos: usize) -> Vec<AgentBehaviorModel> {
    let team = GroundTruthTeam::new(domain).unwrap();
    let data = generate_dataset(&team, demos, 1.0, 0).unwrap();
    let sizes = domain.config().latent_sizes();
    fit(&data, domain.task(), &sizes, &LearnerConfig::default())
        .unwrap()
        .models
}

fn tight() -> ValueConfig {
    ValueConfig {
        tol: 1e-12,
        max_sweeps: 100_000,
        ..ValueConfig::default()
    }
}

#[test]
fn values_scale_with_rewards() {
    let d = build_tiny().unwrap();
    let models = learned(&d, 200);
    let base = evaluate_team_value(d.task(), &models, &tight()).unwrap();
    let scaled_task = TaskModel {
        rewards: RewardTable::compact(d.task().rewards.iter().map(|r| 3.0 * r).collect()),
        ..d.task().clone()
    };
    let scaled = evaluate_team_value(&scaled_task, &models, &tight()).unwrap();
    assert_eq!(base.best, scaled.best);
    for (a, b) in base.values.iter().zip(&scaled.values) {
        assert!((3.0 * a - b).abs() < 1e-8, "{a} {b}");
    }
}

#[test]
fn rescue_values_never_exceed_waiting_people() {
    let d = build_rescue().unwrap();
    let models = learned(&d, 100);
    let v = evaluate_team_value(d.task(), &models, &ValueConfig::default()).unwrap();
    let np = v.num_profiles();
    for s in 0..d.num_states() {
        let bound = Rescue::remaining_population(d.state(s));
        for x in 0..np {
            let value = v.value(s, x);
            assert!(
                value >= -1e-9 && value <= bound + 1e-6,
                "state {s} profile {x}: {value} > {bound}"
            );
        }
        if d.task().is_terminal(s) {
            assert!(v.row(s).iter().all(|&value| value.abs() < 1e-12));
        }
    }
}

fn constant_model(task: &TaskModel, initial: Vec<f64>, stay: bool) -> AgentBehaviorModel {
    let nx = initial.len();
    let mut m = AgentBehaviorModel::uniform(nx, task.actions.size(0), task.num_states, task.num_joint_actions());
    let mut init = TableBuilder::new(nx, task.num_states as u64, initial.clone());
    init.set(0, initial);
    m.initial = init.build();
    if stay {
        let mut trans = TableBuilder::new(nx, m.latent_transition.num_contexts(), vec![1.0 / nx as f64; nx]);
        for x in 0..nx {
            for a in 0..task.num_joint_actions() {
                for s in 0..task.num_states {
                    let mut row = vec![0.0; nx];
                    row[x] = 1.0;
                    trans.set(m.transition_key(x, a, s), row);
                }
            }
        }
        m.latent_transition = trans.build();
    }
    m
}

#[test]
fn uniform_models_give_uniform_beliefs() {
    let d = build_tiny().unwrap();
    let task = d.task();
    let models: Vec<_> = (0..2).map(|_| constant_model(task, vec![0.5, 0.5], false)).collect();
    let team = GroundTruthTeam::new(&d).unwrap();
    let data = generate_dataset(&team, 5, 0.0, 3).unwrap();
    let filter = MentalStateFilter::new(task, &models).unwrap();
    for tr in &data.trajectories {
        let mut f = filter.init(tr.states[0] as usize).unwrap();
        for t in 0..tr.len() {
            f = filter
                .step(&f, tr.actions[t] as usize, tr.states[t + 1] as usize)
                .unwrap();
            for b in &f.beliefs {
                assert!(b.iter().all(|&p| (p - 0.5).abs() < 1e-15));
            }
        }
    }
}

#[test]
fn point_mass_prior_persists_under_sticky_latents() {
    let d = build_tiny().unwrap();
    let task = d.task();
    let models: Vec<_> = (0..2).map(|_| constant_model(task, vec![0.0, 1.0], true)).collect();
    let team = GroundTruthTeam::new(&d).unwrap();
    let data = generate_dataset(&team, 5, 0.0, 9).unwrap();
    let filter = MentalStateFilter::new(task, &models).unwrap();
    for tr in &data.trajectories {
        let mut f = filter.init(tr.states[0] as usize).unwrap();
        for t in 0..tr.len() {
            f = filter
                .step(&f, tr.actions[t] as usize, tr.states[t + 1] as usize)
                .unwrap();
            assert_eq!(f.beliefs, vec![vec![0.0, 1.0]; 2]);
        }
    }
}

#[test]
fn datasets_are_reproducible() {
    let d = build_tiny().unwrap();
    let team = GroundTruthTeam::new(&d).unwrap();
    let a = generate_dataset(&team, 20, 0.3, 42).unwrap();
    let b = generate_dataset(&team, 20, 0.3, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trajectories.iter().filter(|t| t.is_labeled()).count(), 6);
    assert_ne!(a, generate_dataset(&team, 20, 0.3, 43).unwrap());
}
