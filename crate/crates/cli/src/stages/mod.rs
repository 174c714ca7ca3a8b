pub mod gev;
pub mod indices;
pub mod network;
pub mod quantreg;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    Skipped,
}
