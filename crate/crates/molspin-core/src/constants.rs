//! Physical constants in the crate's GHz / ns / tesla / ångström units.

/// Bohr magneton over Planck's constant, GHz per tesla (CODATA).
///
/// A spin with g-factor g in a field B tesla has Zeeman splitting
/// `g * MU_B * B` GHz.
pub const MU_B: f64 = 13.996_244_9;

/// Nuclear magneton over Planck's constant, GHz per tesla (CODATA).
pub const MU_N: f64 = 7.622_593_2e-3;

/// One wavenumber (cm⁻¹) expressed in GHz: c × 1 cm⁻¹.
pub const CM1_TO_GHZ: f64 = 29.979_245_8;

/// Dipole–dipole coupling prefactor (μ₀/4π)·μ_B·μ_N/h in GHz·Å³.
///
/// The point-dipole tensor between an electronic g-factor `g_k` and a
/// nuclear g-factor `g_N` at separation r Å is
/// `g_k * g_N * DIPOLAR_GHZ_A3 * (3 r̂r̂ − 1)/|r|³` GHz.
pub const DIPOLAR_GHZ_A3: f64 = 7.069_205e-3;

/// Proton g-factor (dimensionless), the default bath nuclear species.
pub const G_PROTON: f64 = 5.585_694_689_3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_round_trip_cm1_ghz() {
        let x_cm1 = 0.1742;
        let back = (x_cm1 * CM1_TO_GHZ) / CM1_TO_GHZ;
        assert!((back - x_cm1).abs() < 1e-12 * x_cm1.abs());
    }

    #[test]
    fn magneton_ratio_is_proton_electron_mass_ratio() {
        // μ_B/μ_N = m_p/m_e ≈ 1836.15
        let ratio = MU_B / MU_N;
        assert!((ratio - 1836.152_673).abs() < 0.01);
    }
}
