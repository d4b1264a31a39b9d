use movie_affect::eval::gradsuite::{self, GRAD_TOLERANCE};

fn check(case: fn(u64) -> movie_affect::Result<f64>, name: &str) {
    let errors: Vec<f64> = (0..5).map(|s| case(s).unwrap()).collect();
    for (seed, e) in errors.iter().enumerate() {
        assert!(*e < GRAD_TOLERANCE, "{name} seed {seed}: {e:e} (all: {errors:?})");
    }
}

#[test]
fn dense_layer() {
    check(gradsuite::dense_case, "dense");
}

#[test]
fn lstm_step_unrolled() {
    check(gradsuite::lstm_case, "lstm");
}

#[test]
fn bilstm_stack_with_head() {
    check(gradsuite::bilstm_case, "bilstm");
}

#[test]
fn intra_clip_model() {
    check(gradsuite::intra_case, "intra");
}

#[test]
fn context_model() {
    check(gradsuite::context_case, "context");
}

#[test]
fn full_valence_window() {
    check(gradsuite::full_model_case, "full window");
}
