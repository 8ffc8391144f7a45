mod common;

use std::time::Instant;

use common::gradcheck::{self, Errors, TOLERANCE};

fn assert_within(errors: Errors) {
    assert!(!errors.is_empty());
    for (name, err) in errors {
        assert!(err < TOLERANCE, "`{name}`: relative error {err:e}");
    }
}

#[test]
fn primitive_ops() {
    assert_within(gradcheck::primitive_ops());
}

#[test]
fn loss_functions() {
    assert_within(gradcheck::loss_functions());
}

#[test]
fn stlstm_step_all_inputs_and_weights() {
    assert_within(gradcheck::stlstm_step());
}

#[test]
fn discriminator_weights_and_input() {
    assert_within(gradcheck::discriminator());
}

/// One layer, one context frame per side, two targets, every generator loss
/// including the adversarial term through a frozen discriminator.
#[test]
fn predict_window_end_to_end() {
    let start = Instant::now();
    assert_within(gradcheck::predict_window_with_losses());
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn predict_window_frames() {
    assert_within(gradcheck::predict_window_frames());
}
