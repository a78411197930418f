//! The fixed instruction blocks sent to models, one builder per task:
//! claim generation (both polarities), verification, yes/no-question
//! conversion, claim–citation extraction, and the verification-worthiness
//! check.
//!
//! The wording of these blocks is part of the artifact's contract — scripted
//! mock responses and downstream parsers key on it — so the text is embedded
//! byte-for-byte (including list indentation and unicode punctuation) and
//! must not be reflowed.

use crate::types::{Article, Claim, Polarity};

/// A (system, user) message pair ready for a chat request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessagePair {
    pub system: String,
    pub user: String,
}

const SUPPORTED_CLAIM_SYSTEM: &str = "You are a biomedical annotation expert, and your task is \
to generate a claim that can be supported by the provided article. The claim should be \
interpretable on its own, without relying on the article. Do not generate anything else than \
the claim.";

const REFUTED_CLAIM_SYSTEM: &str = "You are a biomedical annotation expert, and your task is \
to generate a claim that can be refuted by the provided article. The claim should be \
interpretable by its own, without relying on the article. Avoid using simple negative words \
such as not and no. Do not generate anything else than the claim.";

const VERIFICATION_SYSTEM: &str = concat!(
    "You are a fact-checking expert trained in evidence-based medicine. Your task is to ",
    "evaluate how strongly an *article* agrees or disagrees with a *claim*. The *article* is ",
    "retrieved from a search engine using the *claim* as the query.\n",
    "Use the following five-point scale:\n",
    "   - **-2 Strong Contradiction**  \u{2013} The article clearly and directly refutes the claim.\n",
    "   - **-1 Partial Contradiction** \u{2013} The article provides mixed or indirect evidence against the claim.\n",
    "   - ** 0 Neutral / Unrelated**   \u{2013} The article does not address the claim, offers insufficient information, or is irrelevant to the claim.\n",
    "   - ** 1 Partial Agreement**\t \u{2013} The article offers some indirect or tentative support for the claim.\n",
    "   - ** 2 Strong Agreement**\t \u{2013} The article explicitly and strongly supports the claim.\n",
    "Note that the *article* might not describe the exact same subjects, interventions, or ",
    "measurements as the *claim*. In this case, please note the difference and assign a score of 0. \n",
    "Output in two parts only and do not output anything else:\n",
    "<think>[your detailed, step\u{2010}by\u{2010}step explanation for scoring]</think>\n",
    "<score>[the integer score only, i.e., -2, -1, 0, 1, or 2]</score>",
);

const QUESTION_CONVERSION_SYSTEM: &str = "You are a helpful assistant. Your task is to convert \
a yes/no question into a declarative statement. The statement should be a claim that is true \
if the answer to the question is \"yes\". Do not output anything else than the converted \
statement.";

const EXTRACTION_SYSTEM: &str = concat!(
    "You are an expert in biomedical literature and citation analysis. Your task is to extract ",
    "every factual claim and its corresponding full citation from the provided text.\n",
    "\n",
    "Instructions:\n",
    "1. Identify every sentence or clause that makes a factual claim supported by a citation.\n",
    "2. For each claim, identify the inline citation marker (e.g., \"[1]\", \"(Smith, 2023)\", \"\u{b9}\", \"(PMID: 12345)\").\n",
    "3. Resolve this inline citation to its **full reference entry** from the bibliography/reference list at the end of the text.\n",
    "    -- If the text uses numeric citations (e.g., AMA, Vancouver, NLM), match the number to the numbered reference list.\n",
    "    -- If the text uses author-date/page citations (e.g., APA, MLA), match the author/date or author/page to the alphabetical reference list.\n",
    "    -- If the text uses only inline identifiers (e.g., PMID, DOI) and has no reference list, use the full inline citation string itself (e.g., \"PMID: 12345\").\n",
    "4. Output the results as a strict JSON list of objects (**only** JSON; no additional text).\n",
    "5. If a claim has multiple citations, repeat the same claim multiple times, once per citation, each time with a different citation.\n",
    "\n",
    "JSON Format (example structure):\n",
    "[\n",
    "    {\n",
    "        \"claim\": \"The exact text of the factual claim.\",\n",
    "        \"citation\": \"The full text of the corresponding reference entry (e.g., '1. Author AA. Title. Journal. Year...').\"\n",
    "    }\n",
    "]",
);

const WORTHINESS_SYSTEM: &str = "You are a biomedical expert, and your task is to classify if \
a biomedical claim can be fact-checked.\nPlease respond with \"yes\" if the claim meets the \
requirement, and \"no\" otherwise. Only output \"yes\" or \"no\".";

/// Claim-generation messages for one article and polarity. The refuted
/// variant additionally discourages trivial negations.
pub fn claim_generation(article: &Article, polarity: Polarity) -> MessagePair {
    let system = match polarity {
        Polarity::SupportedBy => SUPPORTED_CLAIM_SYSTEM,
        Polarity::RefutedBy => REFUTED_CLAIM_SYSTEM,
    };
    MessagePair {
        system: system.to_owned(),
        user: format!(
            "Here is the article:\nTitle: {}\nAbstract: {}",
            article.title, article.abstract_text
        ),
    }
}

/// Verification messages: how strongly does `article` agree with `claim`,
/// on the five-point scale, answered in the two-block format.
pub fn verification(claim: &Claim, article: &Article) -> MessagePair {
    verification_free(&claim.text, &article.prompt_text())
}

/// Verification messages over free-form claim and source texts, for callers
/// whose evidence does not come from an [`Article`] record.
pub fn verification_free(claim_text: &str, source_text: &str) -> MessagePair {
    MessagePair {
        system: VERIFICATION_SYSTEM.to_owned(),
        user: format!("Article:\n{source_text}\n\nClaim:\n{claim_text}"),
    }
}

/// Messages converting a yes/no question into the declarative claim that is
/// true when the answer is "yes".
pub fn question_conversion(question: &str) -> MessagePair {
    MessagePair {
        system: QUESTION_CONVERSION_SYSTEM.to_owned(),
        user: format!(
            "Convert the following question into a claim, assuming the answer is \"yes\": \nQuestion: {question}"
        ),
    }
}

/// Messages extracting every (claim, full citation) pair from a generated
/// answer as a strict JSON list.
pub fn claim_extraction(model_answer: &str) -> MessagePair {
    MessagePair {
        system: EXTRACTION_SYSTEM.to_owned(),
        user: model_answer.to_owned(),
    }
}

/// Messages asking whether a claim is verification-worthy ("yes"/"no").
pub fn worthiness_check(claim_text: &str) -> MessagePair {
    MessagePair {
        system: WORTHINESS_SYSTEM.to_owned(),
        user: format!("Claim: \"{claim_text}\""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article() -> Article {
        Article {
            pmid: 7,
            title: "Aspirin in MI".into(),
            abstract_text: "A randomized trial.".into(),
        }
    }

    #[test]
    fn supported_and_refuted_generation_share_the_article_layout() {
        let sup = claim_generation(&article(), Polarity::SupportedBy);
        let refuted = claim_generation(&article(), Polarity::RefutedBy);
        for pair in [&sup, &refuted] {
            assert_eq!(
                pair.user,
                "Here is the article:\nTitle: Aspirin in MI\nAbstract: A randomized trial."
            );
        }
        assert!(sup.system.contains("supported by the provided article"));
        assert!(refuted.system.contains("refuted by the provided article"));
    }

    #[test]
    fn only_the_refuted_variant_discourages_plain_negations() {
        let sup = claim_generation(&article(), Polarity::SupportedBy);
        let refuted = claim_generation(&article(), Polarity::RefutedBy);
        let cue = "Avoid using simple negative words such as not and no.";
        assert!(refuted.system.contains(cue));
        assert!(!sup.system.contains(cue));
    }

    #[test]
    fn verification_user_prompt_lists_article_then_claim() {
        let claim = Claim {
            id: "7-s".into(),
            text: "Aspirin reduces MI risk.".into(),
            source_pmid: 7,
            polarity: Polarity::SupportedBy,
        };
        let pair = verification(&claim, &article());
        assert_eq!(
            pair.user,
            "Article:\nTitle: Aspirin in MI\nAbstract: A randomized trial.\n\nClaim:\nAspirin reduces MI risk."
        );
        assert!(pair.system.starts_with("You are a fact-checking expert"));
        assert!(pair.system.contains("five-point scale"));
        assert!(pair.system.contains("<think>"));
        assert!(pair.system.ends_with("</score>"));
    }

    #[test]
    fn question_conversion_assumes_a_yes_answer() {
        let pair = question_conversion("Does X cause Y?");
        assert!(pair.user.contains("assuming the answer is"));
        assert!(pair.user.ends_with("Question: Does X cause Y?"));
        assert!(pair.system.contains("true if the answer to the question is \"yes\""));
    }

    #[test]
    fn extraction_prompt_demands_strict_json_and_per_citation_repetition() {
        let pair = claim_extraction("Some answer [1].");
        assert_eq!(pair.user, "Some answer [1].");
        assert!(pair.system.contains("strict JSON list"));
        assert!(pair.system.contains("repeat the same claim multiple times"));
        assert!(pair.system.contains("\"claim\":"));
        assert!(pair.system.contains("\"citation\":"));
    }

    #[test]
    fn worthiness_check_is_a_yes_no_question_about_the_claim() {
        let pair = worthiness_check("X causes Y");
        assert_eq!(pair.user, "Claim: \"X causes Y\"");
        assert!(pair.system.contains("can be fact-checked"));
        assert!(pair.system.contains("Only output \"yes\" or \"no\"."));
    }
}
