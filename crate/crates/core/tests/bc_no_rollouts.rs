// Own test binary: the step counter is process-wide.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sail_core::baselines::{train_bc, BcConfig};
use sail_core::env::{total_steps, EnvName};
use sail_core::experts::{generate_teacher, ExpertKind};

#[test]
fn bc_training_never_steps_an_environment() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let teacher = generate_teacher(
        EnvName::CartPole,
        ExpertKind::CartPolePD,
        2,
        475.0,
        &mut rng,
    )
    .unwrap();
    let before = total_steps();
    assert!(before > 0);
    let cfg = BcConfig {
        steps: 50,
        batch: 32,
        ..BcConfig::default()
    };
    train_bc::<f64>(EnvName::CartPole, &teacher, &cfg).unwrap();
    assert_eq!(total_steps(), before);
}
