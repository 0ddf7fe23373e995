use crate::blinkcodec::{BlinkCodec, DecoderVars};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Var};

use super::model::{Discriminator, Generator};

/// Generator objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GenLoss {
    /// Minimize `-log D(G(z, y), y)`.
    #[default]
    NonSaturating,
    /// Minimize `log(1 - D(G(z, y), y))`, the literal minimax term.
    Minimax,
}

/// Discriminator loss node plus the two probability batches it was
/// computed from.
#[derive(Clone, Copy, Debug)]
pub struct DiscriminatorLoss {
    pub total: Var,
    pub p_real: Var,
    pub p_fake: Var,
}

/// `bce(D(real, y_r), 1) + bce(D(fake, y_f), 0)`. Pass `fake` as a tape
/// constant so no gradient reaches the generator.
#[allow(clippy::too_many_arguments)]
pub fn d_loss(
    tape: &mut Tape,
    d: &Discriminator,
    d_vars: &[Var],
    real: Var,
    real_labels: &[usize],
    fake: Var,
    fake_labels: &[usize],
) -> Result<DiscriminatorLoss> {
    if tape.shape(real) != tape.shape(fake) || real_labels.len() != fake_labels.len() {
        return Err(Error::InvalidShape(format!(
            "real batch {:?} and fake batch {:?} differ",
            tape.shape(real),
            tape.shape(fake)
        )));
    }
    let p_real = d.forward(tape, d_vars, real, real_labels)?;
    let p_fake = d.forward(tape, d_vars, fake, fake_labels)?;
    let l_real = tape.bce_loss(p_real, &vec![1.0; real_labels.len()])?;
    let l_fake = tape.bce_loss(p_fake, &vec![0.0; fake_labels.len()])?;
    Ok(DiscriminatorLoss {
        total: tape.add(l_real, l_fake)?,
        p_real,
        p_fake,
    })
}

/// Generator loss through `D` and the frozen codec decoder.
#[allow(clippy::too_many_arguments)]
pub fn g_loss(
    tape: &mut Tape,
    g: &Generator,
    g_vars: &[Var],
    codec: &BlinkCodec,
    dec: &DecoderVars,
    d: &Discriminator,
    d_vars: &[Var],
    z: Var,
    labels: &[usize],
    form: GenLoss,
) -> Result<Var> {
    let fake = g.forward(tape, g_vars, codec, dec, z, labels)?;
    let p = d.forward(tape, d_vars, fake, labels)?;
    match form {
        GenLoss::NonSaturating => tape.bce_loss(p, &vec![1.0; labels.len()]),
        GenLoss::Minimax => {
            let l = tape.bce_loss(p, &vec![0.0; labels.len()])?;
            Ok(tape.affine(l, -1.0, 0.0))
        }
    }
}
