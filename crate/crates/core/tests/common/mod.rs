#![allow(dead_code)]

pub mod fixture;

use gazegan::numerics::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;

/// One differentiable expression over a set of input tensors.
pub struct Case {
    pub name: String,
    pub inputs: Vec<Tensor>,
    build: Build,
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // keep clear of the leaky-relu kink so central differences stay smooth
    (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if v.abs() < 1e-2 { v + 0.05 } else { v }
        })
        .collect()
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, rand_vec(rng, n)).unwrap().with_grad()
}

fn case(name: String, inputs: Vec<Tensor>, build: impl Fn(&mut Tape, &[Var]) -> Var + 'static) -> Case {
    Case {
        name,
        inputs,
        build: Box::new(build),
    }
}

/// Every tape operation on shapes drawn from `seed`.
pub fn cases(seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let b = r.gen_range(1..=3);
    let cin = r.gen_range(1..=3);
    let cout = r.gen_range(1..=3);
    let k = r.gen_range(1..=4);
    let stride = r.gen_range(1..=2);
    let pad = r.gen_range(0..=1).min(k - 1);
    let t = r.gen_range(k.max(2)..=9);
    let n = r.gen_range(1..=5);
    let m = r.gen_range(1..=4);
    let rows = r.gen_range(2..=4);
    let idx: Vec<usize> = (0..b).map(|_| r.gen_range(0..rows)).collect();
    let idx1 = idx[0];
    let targets: Vec<f64> = (0..b * m).map(|_| r.gen_range(0.0..1.0)).collect();
    let classes: Vec<usize> = (0..b).map(|_| r.gen_range(0..m)).collect();
    let alpha = 0.2;

    vec![
        case(
            format!("conv1d batched s{stride} p{pad}"),
            vec![rand_tensor(r, vec![b, cin, t]), rand_tensor(r, vec![cout, cin, k]), rand_tensor(r, vec![cout])],
            move |tp, v| tp.conv1d(v[0], v[1], v[2], stride, pad).unwrap(),
        ),
        case(
            "conv1d unbatched".into(),
            vec![rand_tensor(r, vec![cin, t]), rand_tensor(r, vec![cout, cin, k]), rand_tensor(r, vec![cout])],
            move |tp, v| tp.conv1d(v[0], v[1], v[2], stride, pad).unwrap(),
        ),
        case(
            format!("conv1d_transpose batched s{stride} p{pad}"),
            vec![rand_tensor(r, vec![b, cin, t]), rand_tensor(r, vec![cin, cout, k]), rand_tensor(r, vec![cout])],
            move |tp, v| tp.conv1d_transpose(v[0], v[1], v[2], stride, pad).unwrap(),
        ),
        case(
            "conv1d_transpose unbatched".into(),
            vec![rand_tensor(r, vec![cin, t]), rand_tensor(r, vec![cin, cout, k]), rand_tensor(r, vec![cout])],
            move |tp, v| tp.conv1d_transpose(v[0], v[1], v[2], stride, pad).unwrap(),
        ),
        case(
            "dense batched".into(),
            vec![rand_tensor(r, vec![b, n]), rand_tensor(r, vec![m, n]), rand_tensor(r, vec![m])],
            |tp, v| tp.dense(v[0], v[1], v[2]).unwrap(),
        ),
        case(
            "dense vector".into(),
            vec![rand_tensor(r, vec![n]), rand_tensor(r, vec![m, n]), rand_tensor(r, vec![m])],
            |tp, v| tp.dense(v[0], v[1], v[2]).unwrap(),
        ),
        case("embedding".into(), vec![rand_tensor(r, vec![rows, n])], move |tp, v| {
            tp.embedding(v[0], idx1).unwrap()
        }),
        case("embedding_batch".into(), vec![rand_tensor(r, vec![rows, n])], move |tp, v| {
            tp.embedding_batch(v[0], &idx).unwrap()
        }),
        case("leaky_relu".into(), vec![rand_tensor(r, vec![b, n])], move |tp, v| tp.leaky_relu(v[0], alpha)),
        case("tanh".into(), vec![rand_tensor(r, vec![b, n])], |tp, v| tp.tanh(v[0])),
        case("sigmoid".into(), vec![rand_tensor(r, vec![b, n])], |tp, v| tp.sigmoid(v[0])),
        case("bce_loss".into(), vec![rand_tensor(r, vec![b, m])], move |tp, v| {
            let p = tp.sigmoid(v[0]);
            tp.bce_loss(p, &targets).unwrap()
        }),
        case("softmax_cross_entropy".into(), vec![rand_tensor(r, vec![b, m])], move |tp, v| {
            tp.softmax_cross_entropy(v[0], &classes).unwrap()
        }),
        case("reshape".into(), vec![rand_tensor(r, vec![b, n, m])], move |tp, v| {
            tp.reshape(v[0], vec![b * n, m]).unwrap()
        }),
        case(
            "concat axis 0".into(),
            vec![rand_tensor(r, vec![b, n]), rand_tensor(r, vec![m, n])],
            |tp, v| tp.concat(&[v[0], v[1]], 0).unwrap(),
        ),
        case(
            "concat axis 1".into(),
            vec![rand_tensor(r, vec![b, n, t]), rand_tensor(r, vec![b, m, t])],
            |tp, v| tp.concat(&[v[0], v[1]], 1).unwrap(),
        ),
        case(
            "concat axis 2".into(),
            vec![rand_tensor(r, vec![b, n, t]), rand_tensor(r, vec![b, n, m])],
            |tp, v| tp.concat(&[v[0], v[1]], 2).unwrap(),
        ),
        case("affine".into(), vec![rand_tensor(r, vec![b, n])], |tp, v| tp.affine(v[0], 2.0, -1.0)),
        case(
            "add".into(),
            vec![rand_tensor(r, vec![b, n]), rand_tensor(r, vec![b, n])],
            |tp, v| tp.add(v[0], v[1]).unwrap(),
        ),
        case("add same input".into(), vec![rand_tensor(r, vec![b, n])], |tp, v| tp.add(v[0], v[0]).unwrap()),
        case("sum".into(), vec![rand_tensor(r, vec![b, n])], |tp, v| tp.sum(v[0])),
        case("mean".into(), vec![rand_tensor(r, vec![b, n])], |tp, v| tp.mean(v[0])),
    ]
}

fn evaluate(c: &Case, inputs: &[Tensor], weights: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t)).collect();
    let out = (c.build)(&mut tape, &vars);
    let loss = tape.weighted_sum(out, weights).unwrap();
    tape.value(loss).item()
}

/// Largest relative error between the tape gradient and central
/// differences, with the loss a random weighted sum of the output.
pub fn max_relative_error(c: &Case, seed: u64) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = c.inputs.iter().map(|t| tape.leaf(t)).collect();
    let out = (c.build)(&mut tape, &vars);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let weights = rand_vec(&mut rng, tape.value(out).len());
    let loss = tape.weighted_sum(out, &weights).unwrap();
    tape.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = tape.grad(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; c.inputs[i].len()]);
        for j in 0..c.inputs[i].len() {
            let mut plus = c.inputs.clone();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = c.inputs.clone();
            minus[i].data_mut()[j] -= FD_STEP;
            let numeric = (evaluate(c, &plus, &weights) - evaluate(c, &minus, &weights)) / (2.0 * FD_STEP);
            let a = analytic[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

/// `|<conv1d(x), u> - <x, conv1d_transpose(u)>|` relative to the inner
/// product, on random shapes up to 4 x 4 x 8.
pub fn adjoint_gap(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let b = r.gen_range(1..=2);
    let cin = r.gen_range(1..=4);
    let cout = r.gen_range(1..=4);
    let k = r.gen_range(1..=4);
    let stride = r.gen_range(1..=3);
    let pad = r.gen_range(0..k);
    // lengths where the strided windows tile the padded input exactly, so
    // the transpose maps back onto all t positions
    let fits: Vec<usize> = (k.max(2)..=8).filter(|&t| (t + 2 * pad - k) % stride == 0).collect();
    let t = fits[r.gen_range(0..fits.len())];
    let x = Tensor::new(vec![b, cin, t], rand_vec(r, b * cin * t)).unwrap();
    let w = Tensor::new(vec![cout, cin, k], rand_vec(r, cout * cin * k)).unwrap();
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.constant(w.clone());
    let zb = tape.constant(Tensor::zeros(vec![cout]));
    let y = tape.conv1d(xv, wv, zb, stride, pad).unwrap();
    let ylen = tape.value(y).len();
    let yshape = tape.shape(y).to_vec();
    let u = Tensor::new(yshape, rand_vec(r, ylen)).unwrap();
    // conv1d_transpose reads [C_in, C_out, K] from its own point of view,
    // which for the map back from cout to cin channels is w's layout
    let wt = w.clone();
    let uv = tape.constant(u.clone());
    let wtv = tape.constant(wt);
    let zb2 = tape.constant(Tensor::zeros(vec![cin]));
    let back = tape.conv1d_transpose(uv, wtv, zb2, stride, pad).unwrap();
    let back = tape.value(back).data().to_vec();
    assert_eq!(back.len(), x.len());
    let lhs: f64 = tape.value(y).data().iter().zip(u.data()).map(|(a, c)| a * c).sum();
    let rhs: f64 = x.data().iter().zip(&back).map(|(a, c)| a * c).sum();
    (lhs - rhs).abs() / lhs.abs().max(1.0)
}
