//! Gradient fidelity of the tape against central finite differences, over
//! random MLP scalar fields and random composed energies.

use pushcond::diffcore::{grad_scalar, Activation, MlpParams, RealVector, RngStream};
use pushcond::energy::{Discrepancy, EnergyFn, EnergySpec};
use pushcond::models::{AuxModel, Generator};
use pushcond::oracle::finite_diff_grad;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-8)
}

fn random_dims(rng: &mut RngStream, input: usize, output: usize) -> Vec<usize> {
    let n_hidden = 1 + rng.below(3) as usize; // 2-4 layers total
    let mut dims = vec![input];
    for _ in 0..n_hidden {
        dims.push(8 + rng.below(57) as usize); // widths <= 64
    }
    dims.push(output);
    dims
}

fn random_activations(rng: &mut RngStream, layers: usize, head: Activation) -> Vec<Activation> {
    let mut acts: Vec<Activation> = (0..layers - 1)
        .map(|_| {
            if rng.below(2) == 0 {
                Activation::Relu
            } else {
                Activation::Tanh
            }
        })
        .collect();
    acts.push(head);
    acts
}

#[test]
fn random_mlp_scalar_fields_match_finite_differences() {
    let root = RngStream::from_seed(0xF1E1D);
    for trial in 0..100 {
        let mut rng = root.substream(trial);
        let d_in = 2 + rng.below(3) as usize;
        let dims = random_dims(&mut rng, d_in, 1);
        let acts = random_activations(&mut rng, dims.len() - 1, Activation::Identity);
        let mlp = MlpParams::seeded(&dims, &acts, &mut rng).unwrap();
        let at = rng.normal_vec(d_in);

        let (value, grad) = grad_scalar(
            |t, z| {
                let out = mlp.build(t, z);
                t.sum(out)
            },
            &at,
        )
        .unwrap();
        assert!(value.is_finite());
        let fd = finite_diff_grad(
            |x| mlp.forward(&RealVector::from_slice(x)).unwrap()[0],
            at.as_slice(),
            1e-5,
        )
        .unwrap();
        let err = rel_err(grad.as_slice(), &fd);
        assert!(err < 1e-4, "trial {trial}: rel err {err}");
    }
}

#[test]
fn random_composed_energies_match_finite_differences() {
    let root = RngStream::from_seed(0xACCE9);
    for trial in 0..100 {
        let mut rng = root.substream(trial);
        let d_z = 2 + rng.below(3) as usize;
        let d_x = 2 + rng.below(4) as usize;

        let gen_dims = random_dims(&mut rng, d_z, d_x);
        let gen_acts = random_activations(&mut rng, gen_dims.len() - 1, Activation::Identity);
        let generator =
            Generator::new(MlpParams::seeded(&gen_dims, &gen_acts, &mut rng).unwrap(), None)
                .unwrap();

        let use_classifier = rng.below(2) == 0;
        let (spec, c) = if use_classifier {
            let n_cls = 3 + rng.below(8) as usize;
            let aux_dims = random_dims(&mut rng, d_x, n_cls);
            let aux_acts = random_activations(&mut rng, aux_dims.len() - 1, Activation::Softmax);
            let aux = AuxModel::classifier(
                MlpParams::seeded(&aux_dims, &aux_acts, &mut rng).unwrap(),
            )
            .unwrap();
            let hot = rng.below(n_cls as u64) as usize;
            let mut c = vec![0.0; n_cls];
            c[hot] = 1.0;
            (
                EnergySpec::composed(generator, aux, Discrepancy::CrossEntropy, 1.0).unwrap(),
                RealVector::new(c),
            )
        } else {
            let d_c = 3 + rng.below(6) as usize;
            let aux_dims = random_dims(&mut rng, d_x, d_c);
            let aux_acts = random_activations(&mut rng, aux_dims.len() - 1, Activation::Identity);
            let aux =
                AuxModel::embedder(MlpParams::seeded(&aux_dims, &aux_acts, &mut rng).unwrap());
            let c = rng.normal_vec(d_c);
            (
                EnergySpec::composed(generator, aux, Discrepancy::NegCosine, 1.0).unwrap(),
                c,
            )
        };

        let z = rng.normal_vec(d_z);
        let scratch = RngStream::from_seed(1);
        let (_, grad) = spec.value_and_grad(&z, &c, &mut scratch.clone()).unwrap();
        let fd = finite_diff_grad(
            |x| {
                spec.eval(&RealVector::from_slice(x), &c, &mut scratch.clone())
                    .unwrap()
            },
            z.as_slice(),
            1e-5,
        )
        .unwrap();
        let err = rel_err(grad.as_slice(), &fd);
        assert!(err < 1e-4, "trial {trial}: rel err {err}");
    }
}
