mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use ratsup::corpus::{AnnotatorRecord, Label, Split};
use ratsup::masking::{mask_post, CommunityLexicon, MaskConfig};
use ratsup::metrics::{auroc_binary, average_precision, iou_f1, token_f1};
use ratsup::model::Prediction;
use ratsup::rationale::{combine_rationales, ground_truth_attention, softmax_normalize, AttentionStrategy};
use ratsup::loss;

fn bits(len: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), len)
}

fn rationale_triple() -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1usize..8).prop_flat_map(|len| prop::collection::vec(bits(len), 3))
}

fn probability_vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len).prop_map(|raw| softmax_normalize(&raw).into_weights())
}

fn toxic_post(rationales: &[Vec<bool>]) -> ratsup::ResolvedPost {
    let tokens: Vec<String> = (0..rationales[0].len()).map(|i| format!("w{i}")).collect();
    let tokens: Vec<&str> = tokens.iter().map(String::as_str).collect();
    let annotators = rationales
        .iter()
        .map(|r| AnnotatorRecord::new(Label::Hatespeech, Some(r.clone()), &[]))
        .collect();
    resolved("p", &tokens, Split::Train, annotators)
}

proptest! {
    #[test]
    fn loss_is_affine_in_lambda(
        (attention, target) in (1usize..10).prop_flat_map(|n| (probability_vector(n), probability_vector(n))),
        probs in probability_vector(3),
        gold in 0usize..3,
        lambda in prop::sample::select(vec![0.0, 0.001, 1.0, 10.0, 100.0]),
    ) {
        let pred = Prediction { probs: [probs[0], probs[1], probs[2]], attention };
        let target = ratsup::AttentionTarget::from_weights(target).unwrap();
        let l = loss(&pred, Label::from_index(gold).unwrap(), &target, lambda);
        prop_assert!((l.l_total - (l.l_pred + lambda * l.l_att)).abs() < 1e-9);
        prop_assert!(l.l_pred >= 0.0 && l.l_att >= 0.0);
    }

    #[test]
    fn combination_commutes_with_token_permutation(
        triple in rationale_triple(),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let len = triple[0].len();
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut rng(seed));
        let permuted: Vec<Vec<bool>> = triple.iter().map(|r| perm.iter().map(|&i| r[i]).collect()).collect();
        for strategy in AttentionStrategy::ALL {
            let a = softmax_normalize(&combine_rationales(&triple, strategy).unwrap()).into_weights();
            let b = softmax_normalize(&combine_rationales(&permuted, strategy).unwrap()).into_weights();
            for (j, &i) in perm.iter().enumerate() {
                prop_assert!((b[j] - a[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn combination_ignores_annotator_order(triple in rationale_triple()) {
        let mut reversed = triple.clone();
        reversed.reverse();
        for strategy in AttentionStrategy::ALL {
            prop_assert_eq!(
                combine_rationales(&triple, strategy).unwrap(),
                combine_rationales(&reversed, strategy).unwrap()
            );
        }
    }

    #[test]
    fn conservative_concentrates_on_unanimous_tokens(triple in rationale_triple()) {
        let post = toxic_post(&triple);
        let unanimous: Vec<usize> = (0..triple[0].len()).filter(|&i| triple.iter().all(|r| r[i])).collect();
        let normal = ground_truth_attention(&post, AttentionStrategy::Normal).target;
        let conservative = ground_truth_attention(&post, AttentionStrategy::Conservative).target;
        let mass = |w: &[f64]| unanimous.iter().map(|&i| w[i]).sum::<f64>();
        prop_assert!(mass(conservative.weights()) + 1e-12 >= mass(normal.weights()));
    }

    #[test]
    fn auroc_is_invariant_under_monotone_transforms(
        (scores, positives) in (2usize..40).prop_flat_map(|n| (prop::collection::vec(0u8..8, n), bits(n))),
    ) {
        let base: Vec<f64> = scores.iter().map(|&s| f64::from(s) / 7.0).collect();
        let transformed: Vec<f64> = base.iter().map(|&s| (3.0 * s).exp() + 1.0).collect();
        prop_assert_eq!(auroc_binary(&base, &positives), auroc_binary(&transformed, &positives));
        prop_assert_eq!(average_precision(&base, &positives), average_precision(&transformed, &positives));
        match (auroc_binary(&base, &positives), pairwise_auc(&base, &positives)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn rationale_f1_ignores_post_order(
        pairs in prop::collection::vec((bits(6), bits(6)), 1..12),
    ) {
        let preds: Vec<BTreeSet<usize>> = pairs.iter().map(|(p, _)| set_of(p)).collect();
        let golds: Vec<BTreeSet<usize>> = pairs.iter().map(|(_, g)| set_of(g)).collect();
        let (rp, rg): (Vec<_>, Vec<_>) = preds.iter().cloned().zip(golds.iter().cloned()).rev().unzip();
        let iou_a = iou_f1(&discrete(&preds), &discrete(&golds));
        let iou_b = iou_f1(&discrete(&rp), &discrete(&rg));
        prop_assert!((iou_a - iou_b).abs() < 1e-12);
        let tok_a = token_f1(&discrete(&preds), &discrete(&golds));
        let tok_b = token_f1(&discrete(&rp), &discrete(&rg));
        prop_assert!((tok_a - tok_b).abs() < 1e-12);
        prop_assert!((iou_a - oracle_iou_f1(&preds, &golds)).abs() < 1e-12);
        prop_assert!((tok_a - oracle_token_f1(&preds, &golds)).abs() < 1e-12);
    }

    #[test]
    fn masking_is_idempotent_and_deterministic(
        tokens in prop::collection::vec(prop::sample::select(vec!["Jews", "jews", "muslims", "MUSLIMS", "the", "[UNK]", "a"]), 1..12),
    ) {
        let lexicon = CommunityLexicon::new([("Jewish", vec!["jews"]), ("Islam", vec!["muslims"])]).unwrap();
        let config = MaskConfig::default();
        let n = tokens.len();
        let post = resolved(
            "p",
            &tokens,
            Split::Train,
            vec![AnnotatorRecord::new(Label::Offensive, Some(vec![true; n]), &["Islam"]); 3],
        );
        let once = mask_post(&post, &lexicon, &config);
        prop_assert_eq!(&mask_post(&once, &lexicon, &config), &once);
        prop_assert_eq!(&mask_post(&post, &lexicon, &config), &once);
        prop_assert_eq!(once.tokens().len(), n);
        prop_assert_eq!(once.gold_label, post.gold_label);
        prop_assert!(once.tokens().iter().all(|t| !lexicon.matches(t)));
    }
}
