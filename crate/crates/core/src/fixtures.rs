//! Bundled example models.

/// A mug whose fill states are created by the coffee flowing through it.
pub const COFFEE_MUG: &str = include_str!("../../../fixtures/coffeemug.tm");
/// An online purchase, end to end, with four scenarios.
pub const E_PURCHASE: &str = include_str!("../../../fixtures/epurchase.tm");
/// An issuer bank where a transaction can leak seven ways.
pub const ISSUER_BANK: &str = include_str!("../../../fixtures/issuerbank.tm");
/// The authorization policy that goes with [`ISSUER_BANK`].
pub const ISSUER_BANK_POLICY: &str = include_str!("../../../fixtures/issuerbank.tmp");
