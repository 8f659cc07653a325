//! Structural identities the controller relies on, checked on the six reference arms.

use leader_consensus::plant::{TwoLinkArm, REFERENCE_ARM_PARAMETERS};
use leader_consensus::verify::{phi_identity_error, regressor_error, skew_symmetry_error, IDENTITY_TRIALS};

fn main() -> leader_consensus::Result<()> {
    println!(
        "phi identity: max relative error {:.2e}",
        phi_identity_error(IDENTITY_TRIALS, 1)
    );
    println!("arm  min eig M  skew error  regressor error");
    for (i, theta) in REFERENCE_ARM_PARAMETERS.iter().enumerate() {
        let arm = TwoLinkArm::with_standard_gravity(*theta)?;
        println!(
            "{:>3}  {:>9.4}  {:>10.2e}  {:>15.2e}",
            i + 1,
            arm.min_inertia_eigenvalue(),
            skew_symmetry_error(&arm, IDENTITY_TRIALS, i as u64),
            regressor_error(&arm, IDENTITY_TRIALS, i as u64),
        );
    }
    Ok(())
}
