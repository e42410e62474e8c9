#include <doctest.h>

#include "testmend/project.hpp"
#include "testmend/util.hpp"

#include "support/fixtures.hpp"

#include <random>

using namespace testmend;

TEST_CASE("index_project: scans the fixture and skips junk") {
    testing::TempDir tmp("index");
    copy_tree(testing::miniproj_dir(), tmp.path);
    write_file(tmp.path / "apilib" / "broken.py", "def broken(:\n    pass\n");

    MethodIndex index = index_project(tmp.path);
    CHECK(index.by_file.count("apilib/api.py") == 1);
    CHECK(index.by_file.at("apilib/api.py").size() == 7);
    CHECK(index.by_file.count("apilib/broken.py") == 0);  // skipped, not fatal
    CHECK(index.method_count() >= 14);
    CHECK(index.all_tests().size() == 5);

    const MethodRecord* bases = index.find("apilib/api.py", "Api.bases");
    REQUIRE(bases != nullptr);
    CHECK(bases->name() == "bases");
}

TEST_CASE("materialize_sandbox: never aliases the original root") {
    testing::TempDir tmp("sandbox");
    ProjectSnapshot snapshot =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp.path);
    CHECK(snapshot.root != testing::miniproj_dir());
    CHECK(fs::exists(snapshot.root / "apilib" / "api.py"));
    CHECK_FALSE(snapshot.sandbox_id.empty());
    // Mutating the sandbox leaves the original untouched.
    write_file(snapshot.root / "apilib" / "api.py", "def probe(): pass\n");
    CHECK(contains(read_file(testing::miniproj_dir() / "apilib" / "api.py"), "class Api"));
}

TEST_CASE("replace_method: identical text leaves the file bytes unchanged") {
    testing::TempDir tmp("replace-id");
    ProjectSnapshot snapshot =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp.path);
    const MethodRecord target = *snapshot.index.find("apilib/api.py", "Api.enterprise");
    const std::string before = read_file(snapshot.root / "apilib" / "api.py");
    snapshot = replace_method(std::move(snapshot), target, target.source);
    CHECK(read_file(snapshot.root / "apilib" / "api.py") == before);
}

TEST_CASE("replace_method: growing a method shifts following spans") {
    testing::TempDir tmp("replace-grow");
    ProjectSnapshot snapshot =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp.path);
    const MethodRecord target = *snapshot.index.find("apilib/api.py", "Api._base_info");
    const MethodRecord bases_before = *snapshot.index.find("apilib/api.py", "Api.bases");

    const std::string grown = target.source + "\n\n    def _base_info_extra(self):\n"
                                              "        return None";
    // Not a single function; replace with a 2-lines-longer valid body instead.
    const std::string longer =
        "def _base_info(self, force=False):\n"
        "    url = self.build_url(\"meta\", \"bases\")\n"
        "    extra = len(url)\n"
        "    assert extra >= 0\n"
        "    data = {\n"
        "        \"url\": url,\n"
        "        \"bases\": [dict(info) for info in self._bases],\n"
        "    }\n"
        "    return data";
    (void)grown;
    snapshot = replace_method(std::move(snapshot), target, longer);
    const MethodRecord* bases_after = snapshot.index.find("apilib/api.py", "Api.bases");
    REQUIRE(bases_after != nullptr);
    CHECK(bases_after->span.start == bases_before.span.start + 2);
    CHECK(bases_after->span.end == bases_before.span.end + 2);
    CHECK(bases_after->source == bases_before.source);
}

TEST_CASE("replace_method: re-indents to the target column") {
    testing::TempDir tmp("replace-indent");
    ProjectSnapshot snapshot =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp.path);
    const MethodRecord target = *snapshot.index.find("apilib/api.py", "Api.enterprise");
    // Candidate arrives dedented, as stitched responses do.
    snapshot = replace_method(std::move(snapshot), target,
                              "def enterprise(self, account_id):\n"
                              "    if not account_id:\n"
                              "        raise ValueError(\"NA\")\n"
                              "    return {\"id\": account_id, \"kind\": \"enterprise\"}");
    const MethodRecord* updated = snapshot.index.find("apilib/api.py", "Api.enterprise");
    REQUIRE(updated != nullptr);
    CHECK(contains(updated->source, "    def enterprise(self, account_id):"));
    CHECK(contains(updated->source, "        if not account_id:"));
    CHECK(contains(updated->source, "            raise ValueError(\"NA\")"));
}

TEST_CASE("replace_method then restoring the original is byte-identical") {
    testing::TempDir tmp("replace-roundtrip");
    ProjectSnapshot snapshot =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp.path);
    const fs::path file = snapshot.root / "apilib" / "api.py";
    const std::string original_bytes = read_file(file);
    const MethodRecord target = *snapshot.index.find("apilib/api.py", "Api.batch_delete");

    snapshot = replace_method(std::move(snapshot), target,
                              "def batch_delete(self, record_ids):\n"
                              "    return []");
    CHECK(read_file(file) != original_bytes);

    const MethodRecord* shrunk = snapshot.index.find("apilib/api.py", "Api.batch_delete");
    REQUIRE(shrunk != nullptr);
    snapshot = replace_method(std::move(snapshot), *shrunk, dedent(target.source));
    CHECK(read_file(file) == original_bytes);
}

TEST_CASE("replace_method: rejects unparseable candidates before any run") {
    testing::TempDir tmp("replace-bad");
    ProjectSnapshot snapshot =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp.path);
    const MethodRecord target = *snapshot.index.find("apilib/api.py", "Api.enterprise");
    CHECK_THROWS_AS(replace_method(std::move(snapshot), target, "def broken(:\n    pass"),
                    ParseError);
}

TEST_CASE("replace_method: span drift is detected") {
    testing::TempDir tmp("replace-drift");
    ProjectSnapshot snapshot =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp.path);
    const MethodRecord stale = *snapshot.index.find("apilib/api.py", "Api.enterprise");
    // Edit the file behind the record's back.
    const fs::path file = snapshot.root / "apilib" / "api.py";
    write_file(file, replace_all(read_file(file), "kind", "sort"));
    CHECK_THROWS_AS(replace_method(std::move(snapshot), stale,
                                   "def enterprise(self, account_id):\n    return None"),
                    SpanDrift);
}

TEST_CASE("anonymize_test_name: renames and substitutes every occurrence") {
    testing::TempDir tmp("anon");
    ProjectSnapshot snapshot =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp.path);
    // Add a second occurrence of the name inside the file.
    const fs::path test_file = snapshot.root / "tests" / "test_api.py";
    write_file(test_file, read_file(test_file) +
                              "\n\ndef test_registry():\n"
                              "    assert test_build_url is not None\n");
    snapshot.index = index_project(snapshot.root, snapshot.runner.test_file_glob);
    const TestRecord target = *snapshot.index.find("tests/test_api.py", "test_build_url");

    std::mt19937_64 rng(7);
    TestRecord renamed = anonymize_test_name(snapshot, target, rng);
    CHECK(renamed.name().rfind("test_", 0) == 0);
    CHECK(renamed.name().size() == 13);  // "test_" + 8 letters
    CHECK(renamed.name() != "test_build_url");
    for (char c : renamed.name().substr(5)) {
        CHECK(c >= 'a');
        CHECK(c <= 'z');
    }
    const std::string rewritten = read_file(test_file);
    CHECK_FALSE(contains(rewritten, "test_build_url"));
    // Both occurrences now carry the new name.
    size_t count = 0;
    size_t pos = 0;
    while ((pos = rewritten.find(renamed.name(), pos)) != std::string::npos) {
        ++count;
        pos += renamed.name().size();
    }
    CHECK(count == 2);

    // Deterministic under a fixed seed.
    testing::TempDir tmp2("anon2");
    ProjectSnapshot snapshot2 =
        materialize_sandbox(testing::miniproj_dir(), testing::fixture_runner(), tmp2.path);
    const TestRecord target2 = *snapshot2.index.find("tests/test_api.py", "test_build_url");
    std::mt19937_64 rng2(7);
    TestRecord renamed2 = anonymize_test_name(snapshot2, target2, rng2);
    CHECK(renamed2.name() == renamed.name());
}

TEST_CASE("resolve_call_sites: project membership and constructor rule") {
    MethodIndex index = index_project(testing::miniproj_dir());
    const MethodRecord bases = *index.find("apilib/api.py", "Api.bases");
    std::vector<CallSite> sites = extract_call_sites(bases, "");
    resolve_call_sites(sites, index);

    bool saw_base_info = false;
    bool saw_ctor = false;
    for (const CallSite& site : sites) {
        if (site.callee_name == "self._base_info") {
            REQUIRE(site.resolved.has_value());
            CHECK(*site.resolved == "Api._base_info");
            saw_base_info = true;
        }
        if (site.callee_name == "Base") {
            REQUIRE(site.resolved.has_value());
            CHECK(*site.resolved == "Base.__init__");
            saw_ctor = true;
        }
        CHECK(site.line >= bases.span.start);
        CHECK(site.line <= bases.span.end);
    }
    CHECK(saw_base_info);
    CHECK(saw_ctor);

    // Third-party-style callees stay unresolved.
    CallSite foreign;
    foreign.callee_name = "requests.get";
    std::vector<CallSite> unresolved{foreign};
    resolve_call_sites(unresolved, index);
    CHECK_FALSE(unresolved[0].resolved.has_value());
}
