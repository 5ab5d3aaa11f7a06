#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eimlab/rng.hpp"
#include "eimlab/text_codec.hpp"

using namespace eimlab;

TEST_CASE("vocabulary determinism and unit rows") {
    const SemanticVocabulary a = SemanticVocabulary::default_vocabulary(17);
    const SemanticVocabulary b = SemanticVocabulary::default_vocabulary(17);
    for (const auto& [attr, values] : a.attributes())
        for (const auto& v : values) {
            const Token tok{attr, v};
            CHECK((a.embedding(tok) - b.embedding(tok)).cwiseAbs().maxCoeff() == 0.0);
            CHECK(a.embedding(tok).norm() == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("encode prompt") {
    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();

    SUBCASE("single token equals its table row") {
        const TextEmbedding e = vocab.encode_prompt({{"expression", "smile"}});
        CHECK(e.length() == 1);
        CHECK((e.rows.row(0).transpose() - vocab.embedding({"expression", "smile"}))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }

    SUBCASE("bit-identical re-encoding") {
        std::vector<Token> p{{"color", "red"}, {"object", "circle"}};
        const TextEmbedding a = vocab.encode_prompt(p);
        const TextEmbedding b = vocab.encode_prompt(p);
        CHECK((a.rows - b.rows).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("prompts differ only in the changed token row") {
        std::vector<Token> p0{{"expression", "smile"}, {"coat", "none"}};
        std::vector<Token> p1{{"expression", "smile"}, {"coat", "purple"}};
        const TextEmbedding a = vocab.encode_prompt(p0);
        const TextEmbedding b = vocab.encode_prompt(p1);
        CHECK((a.rows.row(0) - b.rows.row(0)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.rows.row(1) - b.rows.row(1)).cwiseAbs().maxCoeff() > 0.0);
    }

    SUBCASE("errors") {
        CHECK_THROWS(vocab.encode_prompt({}));
        CHECK_THROWS_WITH_AS(vocab.encode_prompt({{"color", "mauve"}}),
                             doctest::Contains("color=mauve"), std::invalid_argument);
    }
}

TEST_CASE("pool") {
    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    SUBCASE("single row") {
        const TextEmbedding e = vocab.encode_prompt({{"color", "red"}});
        CHECK((pool(e).vector - e.rows.row(0).transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("r and -r pool to zero") {
        TextEmbedding e;
        RngStream rng = derive_stream(5, 0);
        e.rows.resize(2, 8);
        e.rows.row(0) = rng.normal_matrix(1, 8);
        e.rows.row(1) = -e.rows.row(0);
        e.tokens = {null_token(), null_token()};
        CHECK(pool(e).vector.cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("matches naive mean") {
        TextEmbedding e;
        RngStream rng = derive_stream(5, 1);
        e.rows = rng.normal_matrix(3, 6);
        e.tokens = {null_token(), null_token(), null_token()};
        const PooledEmbedding p = pool(e);
        for (int j = 0; j < 6; ++j) {
            const double ref = (e.rows(0, j) + e.rows(1, j) + e.rows(2, j)) / 3.0;
            CHECK(std::abs(p.vector(j) - ref) < 1e-12);
        }
    }
    SUBCASE("empty rejected") {
        TextEmbedding e;
        e.rows.resize(0, 4);
        CHECK_THROWS(pool(e));
    }
}

TEST_CASE("text direction and application") {
    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    std::vector<Token> p0{{"expression", "plain"}, {"coat", "none"}};
    std::vector<Token> p1{{"expression", "smile"}, {"coat", "none"}};
    const TextEmbedding a = vocab.encode_prompt(p0);
    const TextEmbedding b = vocab.encode_prompt(p1);

    SUBCASE("alpha 0 and identical prompts annihilate") {
        CHECK(text_direction(a, b, 0.0).delta.cwiseAbs().maxCoeff() == 0.0);
        CHECK(text_direction(a, a, 2.5).delta.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("single-row half difference") {
        const EditDirection n = text_direction(a, b, 0.5);
        CHECK(n.subspace == Subspace::Text);
        CHECK(n.degree == 0.5);
        CHECK((n.delta.row(0) - 0.5 * (b.rows.row(0) - a.rows.row(0))).cwiseAbs().maxCoeff() <
              1e-15);
        CHECK(n.delta.row(1).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("apply identities") {
        EditDirection zero = text_direction(a, a, 1.0);
        CHECK((apply_text_direction(a, zero).rows - a.rows).cwiseAbs().maxCoeff() == 0.0);

        EditDirection n = text_direction(a, b, 1.0);
        const TextEmbedding moved = apply_text_direction(a, n);
        CHECK((moved.rows - b.rows).cwiseAbs().maxCoeff() < 1e-12);

        EditDirection back = n;
        back.delta = -back.delta;
        const TextEmbedding round = apply_text_direction(moved, back);
        CHECK((round.rows - a.rows).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("subspace and shape errors") {
        EditDirection img = text_direction(a, b, 1.0);
        img.subspace = Subspace::Image;
        CHECK_THROWS(apply_text_direction(a, img));
        const TextEmbedding single = vocab.encode_prompt({{"color", "red"}});
        CHECK_THROWS(text_direction(a, single, 1.0));
    }

    SUBCASE("pooled consistency") {
        const EditDirection n = text_direction(a, b, 0.7);
        const PooledEmbedding lhs = pool(apply_text_direction(a, n));
        const Eigen::VectorXd rhs =
            pool(a).vector + n.delta.colwise().mean().transpose();
        CHECK((lhs.vector - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("multi attribute manipulation") {
    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    std::vector<Token> p0{{"color", "red"}, {"object", "square"}, {"size", "small"}};
    std::vector<Token> p1{{"color", "blue"}, {"object", "circle"}, {"size", "small"}};
    const TextEmbedding c0 = vocab.encode_prompt(p0);
    const TextEmbedding c1 = vocab.encode_prompt(p1);

    EditPlan plan;
    plan.entries = {{"color", "red", "blue", 0.3}, {"object", "square", "circle", 0.7}};

    SUBCASE("zero and full interpolation") {
        EditPlan zero = plan;
        for (auto& e : zero.entries) e.degree = 0.0;
        CHECK((multi_attr_manipulate(c0, c1, zero).rows - c0.rows).cwiseAbs().maxCoeff() == 0.0);

        EditPlan full = plan;
        for (auto& e : full.entries) e.degree = 1.0;
        const TextEmbedding r = multi_attr_manipulate(c0, c1, full);
        CHECK((r.rows.row(0) - c1.rows.row(0)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((r.rows.row(1) - c1.rows.row(1)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((r.rows.row(2) - c0.rows.row(2)).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("per-row interpolation oracle") {
        const TextEmbedding r = multi_attr_manipulate(c0, c1, plan);
        CHECK((r.rows.row(0) - (c0.rows.row(0) + 0.3 * (c1.rows.row(0) - c0.rows.row(0))))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
        CHECK((r.rows.row(1) - (c0.rows.row(1) + 0.7 * (c1.rows.row(1) - c0.rows.row(1))))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
        CHECK((r.rows.row(2) - c0.rows.row(2)).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("composability with single directions") {
        // disjoint rows: applying single-attribute directions in sequence
        // matches the plan result
        EditPlan only_color;
        only_color.entries = {plan.entries[0]};
        EditPlan only_object;
        only_object.entries = {plan.entries[1]};
        const TextEmbedding seq =
            multi_attr_manipulate(multi_attr_manipulate(c0, c1, only_color), c1, only_object);
        const TextEmbedding both = multi_attr_manipulate(c0, c1, plan);
        CHECK((seq.rows - both.rows).cwiseAbs().maxCoeff() < 1e-15);
    }

    SUBCASE("absent attribute rejected") {
        EditPlan bad;
        bad.entries = {{"coat", "none", "purple", 1.0}};
        CHECK_THROWS(multi_attr_manipulate(c0, c1, bad));
    }
}

TEST_CASE("extended direction") {
    Eigen::VectorXd n1(2), n2(2);
    n1 << 1, 0;
    n2 << 0.6, 0.8;

    const Eigen::VectorXd e1 = extended_direction(n1, 1, 2);
    CHECK(e1.size() == 4);
    CHECK(e1(0) == 1.0);
    CHECK(e1(1) == 0.0);
    CHECK(e1(2) == 0.0);
    CHECK(e1(3) == 0.0);

    const Eigen::VectorXd e2 = extended_direction(n2, 2, 2);
    CHECK(e1.dot(e2) == 0.0);

    RngStream rng = derive_stream(11, 0);
    for (int i = 0; i < 100; ++i) {
        const Eigen::VectorXd v = rng.normal_matrix(5, 1);
        const int block = static_cast<int>(rng.below(3)) + 1;
        CHECK(extended_direction(v, block, 3).norm() ==
              doctest::Approx(v.norm()).epsilon(1e-15));
    }

    CHECK_THROWS(extended_direction(n1, 0, 2));
    CHECK_THROWS(extended_direction(n1, 3, 2));
}

TEST_CASE("vocabulary json round trip") {
    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary(23);
    const SemanticVocabulary back = SemanticVocabulary::from_json(vocab.to_json());
    CHECK(back.seed() == vocab.seed());
    CHECK(back.width() == vocab.width());
    REQUIRE(back.attributes() == vocab.attributes());
    std::vector<Token> p{{"color", "green"}, {"size", "large"}};
    CHECK((back.encode_prompt(p).rows - vocab.encode_prompt(p).rows).cwiseAbs().maxCoeff() ==
          0.0);
}
