#include <gtest/gtest.h>

#include <sstream>

#include "dxi/cohort.hpp"

using namespace dxi;

namespace {

const char* kCasesHeader =
    "case_id,patient_id,age,psa,historical_pirads,verification,gleason_gg,age_band,pi_qual,ethnicity\n";

std::string expect_data_error(const std::function<void()>& f) {
    try {
        f();
    } catch (const DataError& e) {
        return e.what();
    }
    ADD_FAILURE() << "no DataError thrown";
    return {};
}

std::vector<CaseRecord> cases_from(const std::string& body) {
    std::istringstream in(kCasesHeader + body);
    return load_cases(in);
}

CaseRecord make_case(std::string id, std::string patient, VerificationKind kind, std::optional<int> gg = std::nullopt) {
    CaseRecord c;
    c.case_id = std::move(id);
    c.patient_id = std::move(patient);
    c.age = 65;
    c.psa = 7.5;
    c.historical_pirads = kind == VerificationKind::HistologyVerified ? 4 : 2;
    c.verification = {kind, gg};
    return c;
}

}  // namespace

TEST(Cutoff, Binarize) {
    EXPECT_EQ(binarize(2, CutoffRule::PiradsGE3), 0);
    EXPECT_EQ(binarize(3, CutoffRule::PiradsGE3), 1);
    EXPECT_EQ(binarize(3, CutoffRule::PiradsGE4), 0);
    EXPECT_EQ(binarize(4, CutoffRule::PiradsGE4), 1);
    EXPECT_EQ(parse_cutoff("GE4"), CutoffRule::PiradsGE4);
    EXPECT_THROW(parse_cutoff("GE5"), std::invalid_argument);
}

TEST(Readings, LoadsCsvAndCrlf) {
    std::istringstream in("case_id,reader_id,pirads\r\nc1,r1,3\r\nc1,r2,5\r\n");
    const auto r = load_readings(in);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[1].reader_id, "r2");
    EXPECT_EQ(r[1].pirads, 5);
}

TEST(Readings, PiradsOutOfRangeNamesLine) {
    const auto msg = expect_data_error([] {
        std::istringstream in("case_id,reader_id,pirads\nc1,r1,3\nc1,r2,7\n");
        load_readings(in);
    });
    EXPECT_EQ(msg, "line 3: pirads out of range (7)");
}

TEST(Readings, DuplicatePairRejected) {
    const auto msg = expect_data_error([] {
        std::istringstream in("case_id,reader_id,pirads\nc1,r1,3\nc1,r1,4\n");
        load_readings(in);
    });
    EXPECT_NE(msg.find("duplicate pair"), std::string::npos);
    EXPECT_NE(msg.find("line 3"), std::string::npos);
}

TEST(Readings, WrongHeaderRejected) {
    EXPECT_THROW(
        {
            std::istringstream in("case,reader,score\nc1,r1,3\n");
            load_readings(in);
        },
        DataError);
}

TEST(Cases, ParsesAllVerificationKinds) {
    const auto c = cases_from(
        "a,p1,64,5.5,4,HISTO,2,60-69,3,white\n"
        "b,p1,64,5.5,2,CONSENSUS_NEG,,,,\n"
        "c,p2,51,3.1,1,UNVERIFIED,,,,\n"
        "d,p3,70,12,5,HISTO,1,,2,\n");
    ASSERT_EQ(c.size(), 4u);
    EXPECT_EQ(c[0].label(), 1);
    EXPECT_EQ(c[1].label(), 0);
    EXPECT_FALSE(c[2].label().has_value());
    EXPECT_TRUE(c[2].needs_imputation());
    EXPECT_EQ(c[3].label(), 0);  // grade group 1 is not significant
    EXPECT_EQ(c[0].strata.pi_qual, 3);
    EXPECT_EQ(c[0].strata.ethnicity, "white");
    EXPECT_FALSE(c[1].strata.age_band.has_value());
}

TEST(Cases, UnknownVerificationCode) {
    const auto msg = expect_data_error([] { cases_from("a,p1,64,5.5,4,BIOPSY,,,,\n"); });
    EXPECT_EQ(msg, "line 2: unknown verification code 'BIOPSY'");
}

TEST(Cases, HistologyNeedsGradeGroup) {
    const auto msg = expect_data_error([] { cases_from("a,p1,64,5.5,4,HISTO,,,,\n"); });
    EXPECT_NE(msg.find("missing required field gleason_gg"), std::string::npos);
}

TEST(Cases, MissingRequiredField) {
    const auto msg = expect_data_error([] { cases_from("a,,64,5.5,4,HISTO,2,,,\n"); });
    EXPECT_EQ(msg, "line 2: missing required field patient_id");
}

TEST(Cases, WrongFieldCount) {
    EXPECT_THROW(cases_from("a,p1,64,5.5,4\n"), DataError);
}

TEST(Cases, RejectsBadNumbers) {
    EXPECT_THROW(cases_from("a,p1,sixty,5.5,4,HISTO,2,,,\n"), DataError);
    EXPECT_THROW(cases_from("a,p1,64,-1,4,HISTO,2,,,\n"), DataError);
    EXPECT_THROW(cases_from("a,p1,64,5.5,4,HISTO,2,,4,\n"), DataError);
}

TEST(Cases, CsvRoundTrip) {
    const auto original = cases_from(
        "a,p1,64,5.25,4,HISTO,2,60-69,3,white\n"
        "b,p2,48,0.8,2,CONSENSUS_NEG,,<50,1,\n"
        "c,p3,71,10.125,2,UNVERIFIED,,,,asian\n");
    std::ostringstream out;
    write_cases(out, original);
    std::istringstream in(out.str());
    EXPECT_EQ(load_cases(in), original);
}

TEST(Cases, JsonMatchesCsv) {
    const auto csv = cases_from("a,p1,64,5.25,4,HISTO,2,60-69,3,white\n");
    std::istringstream in(R"([{"case_id":"a","patient_id":"p1","age":64,"psa":5.25,"historical_pirads":4,
        "verification":"HISTO","gleason_gg":2,"age_band":"60-69","pi_qual":3,"ethnicity":"white"}])");
    EXPECT_EQ(load_cases(in, Format::Json), csv);
}

TEST(Predictions, RangeAndAlignment) {
    EXPECT_THROW(
        {
            std::istringstream in("case_id,score\na,101\n");
            load_predictions(in);
        },
        DataError);
    const std::vector<CaseRecord> cases{make_case("a", "p1", VerificationKind::Unverified),
                                        make_case("b", "p2", VerificationKind::Unverified)};
    const std::vector<AiPrediction> ok{{"b", 20.0}, {"a", 10.0}};
    EXPECT_EQ(align_predictions(cases, ok), (std::vector<double>{10.0, 20.0}));

    const std::vector<AiPrediction> unknown{{"a", 1.0}, {"b", 2.0}, {"zz", 3.0}};
    EXPECT_NE(expect_data_error([&] { align_predictions(cases, unknown); }).find("unknown case"), std::string::npos);
    const std::vector<AiPrediction> missing{{"a", 1.0}};
    EXPECT_THROW(align_predictions(cases, missing), DataError);
    const std::vector<AiPrediction> dup{{"a", 1.0}, {"a", 2.0}, {"b", 3.0}};
    EXPECT_THROW(align_predictions(cases, dup), DataError);
}

TEST(AgeBand, Boundaries) {
    EXPECT_EQ(age_band_for(49), "<50");
    EXPECT_EQ(age_band_for(50), "50-59");
    EXPECT_EQ(age_band_for(59), "50-59");
    EXPECT_EQ(age_band_for(60), "60-69");
    EXPECT_EQ(age_band_for(70), ">=70");
}

TEST(Validation, MedianEighteenReaders) {
    // Reader counts 10..26 across 17 cases: median 18.
    std::vector<CaseRecord> cases;
    std::vector<ReaderScore> readings;
    for (int c = 0; c < 17; ++c) {
        const std::string id = "c" + std::to_string(c);
        cases.push_back(make_case(id, "p" + std::to_string(c), VerificationKind::ConsensusNegative));
        for (int r = 0; r < 10 + c; ++r) readings.push_back({id, "r" + std::to_string(r), 1 + (r + c) % 5});
    }
    const auto v = validate_cohort(cases, readings, {});
    ASSERT_TRUE(v.readers_per_case.has_value());
    EXPECT_EQ(v.readers_per_case->min, 10u);
    EXPECT_DOUBLE_EQ(v.readers_per_case->median, 18.0);
    EXPECT_EQ(v.readers_per_case->max, 26u);
    EXPECT_EQ(v.n_readers, 26u);
    EXPECT_EQ(v.readers_by_case.at("c8"), 18u);
}

TEST(Validation, UnverifiedFractions) {
    auto cohort = [](int n, int unverified) {
        std::vector<CaseRecord> cases;
        for (int i = 0; i < n; ++i)
            cases.push_back(make_case("c" + std::to_string(i), "p" + std::to_string(i),
                                      i < unverified ? VerificationKind::Unverified : VerificationKind::HistologyVerified,
                                      i < unverified ? std::nullopt : std::optional<int>(i % 3)));
        return validate_cohort(cases, {}, {});
    };
    const auto sthlm = cohort(1143, 765);
    EXPECT_EQ(sthlm.n_unverified, 765u);
    EXPECT_NEAR(sthlm.unverified_fraction, 0.669, 5e-4);
    const auto prime = cohort(476, 156);
    EXPECT_NEAR(prime.unverified_fraction, 0.328, 5e-4);
}

TEST(Validation, IntegrityCountsAndWarnings) {
    const std::vector<CaseRecord> cases{make_case("a", "p1", VerificationKind::HistologyVerified, 3),
                                        make_case("b", "p1", VerificationKind::ConsensusNegative)};
    const std::vector<ReaderScore> readings{{"a", "r1", 4}, {"a", "r2", 5}, {"zz", "r1", 2}};
    const std::vector<AiPrediction> predictions{{"a", 70.0}, {"qq", 1.0}};
    const auto v = validate_cohort(cases, readings, predictions);
    EXPECT_EQ(v.n_patients, 1u);
    EXPECT_EQ(v.n_positive, 1u);
    ASSERT_TRUE(v.prevalence.has_value());
    EXPECT_DOUBLE_EQ(*v.prevalence, 0.5);
    EXPECT_EQ(v.readings_with_unknown_case, 1u);
    EXPECT_EQ(v.predictions_with_unknown_case, 1u);
    EXPECT_EQ(v.cases_without_prediction, 1u);
    EXPECT_EQ(v.cases_without_readings, 1u);
    EXPECT_FALSE(v.warnings.empty());
}

TEST(Validation, NoReaderDataWarning) {
    const std::vector<CaseRecord> cases{make_case("a", "p1", VerificationKind::ConsensusNegative)};
    const auto v = validate_cohort(cases, {}, {});
    EXPECT_NE(std::find(v.warnings.begin(), v.warnings.end(), "no reader data"), v.warnings.end());
}
