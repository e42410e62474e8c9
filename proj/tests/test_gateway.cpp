#include <doctest.h>

#include "testmend/gateway.hpp"
#include "testmend/util.hpp"

#include "support/fixtures.hpp"

using namespace testmend;

TEST_CASE("request_key: stable content-addressed hashing") {
    ChatHistory history{{"user", "hi"}};
    GenParams params;
    const std::string key = request_key(history, params);
    CHECK(key.size() == 64);
    CHECK(key == request_key(history, params));

    ChatHistory other{{"user", "hi there"}};
    CHECK(key != request_key(other, params));
    GenParams hot = params;
    hot.temperature = 0.9;
    CHECK(key != request_key(history, hot));
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("replay backend: hit and loud miss") {
    auto store = std::make_shared<ReplayStore>();
    ChatHistory history{{"user", "hi"}};
    GenParams params;
    store->put(history, params, "ok");

    ReplayBackend backend(store);
    CHECK(backend.complete(history, params) == "ok");

    ChatHistory missing{{"user", "bye"}};
    try {
        backend.complete(missing, params);
        FAIL("expected ReplayMiss");
    } catch (const ReplayMiss& e) {
        CHECK(e.key() == request_key(missing, params));
        CHECK(contains(e.what(), e.key()));
    }
}

TEST_CASE("record then replay round-trips byte-identically across a restart") {
    testing::TempDir tmp("gateway");
    const fs::path store_path = tmp.path / "replay.json";

    testing::ScriptedBackend scripted;
    scripted.script("round-trip-probe",
                    {"first reply", "second reply", "third reply"});

    GenParams params;
    std::vector<std::string> recorded;
    {
        auto store = std::make_shared<ReplayStore>(store_path);
        auto inner = std::make_shared<testing::ScriptedBackend>(scripted);
        RecordingBackend recorder(inner, store);
        ChatSession session(recorder, params);
        recorded.push_back(session.send_user("round-trip-probe: one"));
        recorded.push_back(session.send_user("round-trip-probe: two"));
        recorded.push_back(session.send_user("round-trip-probe: three"));
    }
    {
        auto store = std::make_shared<ReplayStore>(store_path);
        CHECK(store->size() == 3);
        ReplayBackend replay(store);
        ChatSession session(replay, params);
        CHECK(session.send_user("round-trip-probe: one") == recorded[0]);
        CHECK(session.send_user("round-trip-probe: two") == recorded[1]);
        CHECK(session.send_user("round-trip-probe: three") == recorded[2]);
    }
}

TEST_CASE("replay store file format: hex keys to response strings") {
    testing::TempDir tmp("store");
    const fs::path path = tmp.path / "replay.json";
    {
        ReplayStore store(path);
        store.put_raw(sha256_hex("k1"), "v1");
        store.put_raw(sha256_hex("k2"), "v2");
        store.save();
    }
    const std::string text = read_file(path);
    CHECK(contains(text, sha256_hex("k1")));
    CHECK(contains(text, "v1"));
    ReplayStore reloaded(path);
    CHECK(reloaded.size() == 2);
    CHECK(*reloaded.get(sha256_hex("k2")) == "v2");
}

TEST_CASE("chat session: history grows monotonically") {
    auto store = std::make_shared<ReplayStore>();
    GenParams params;
    ChatHistory h1{{"user", "a"}};
    store->put(h1, params, "ra");
    ChatHistory h2 = h1;
    h2.push_back({"assistant", "ra"});
    h2.push_back({"user", "b"});
    store->put(h2, params, "rb");

    ReplayBackend backend(store);
    ChatSession session(backend, params);
    CHECK(session.send(h1) == "ra");
    CHECK(session.send(h2) == "rb");
    CHECK(session.calls() == 2);
    REQUIRE(session.history().size() == 4);

    // Rewriting the prefix is rejected.
    ChatHistory tampered = h2;
    tampered[0].content = "changed";
    tampered.push_back({"assistant", "rb"});
    tampered.push_back({"user", "c"});
    CHECK_THROWS_AS(session.send(tampered), std::logic_error);
    // Shrinking is rejected too.
    CHECK_THROWS_AS(session.send(h1), std::logic_error);
}
