import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synspace.errors import (
    EmptyFieldError,
    FormatError,
    NetworkError,
    ParseError,
    RateLimitedError,
)
from synspace.textgen import (
    ClassLexicon,
    LlmClient,
    combine,
    load_lexicon_cache,
    parse_candidates,
    render_descriptor_prompt,
    render_synonym_prompt,
    save_lexicon_cache,
)


class TestPrompts:
    def test_synonym_prompt_exact(self):
        assert render_synonym_prompt("sunflower", "flowers") == (
            "Tell me in five words or less what are some common ways of "
            "referring to sunflower in flowers?"
        )

    def test_synonym_prompt_empty_class(self):
        with pytest.raises(EmptyFieldError):
            render_synonym_prompt("", "flowers")

    def test_synonym_prompt_empty_dataset(self):
        with pytest.raises(EmptyFieldError):
            render_synonym_prompt("sunflower", "   ")

    def test_punctuation_preserved(self):
        out = render_synonym_prompt("A-10", "aircraft")
        assert "referring to A-10 in aircraft?" in out

    def test_descriptor_prompt_exact(self):
        assert render_descriptor_prompt("sunflower") == (
            "What are useful features for distinguishing a sunflower in a photo?"
        )

    def test_descriptor_prompt_empty(self):
        with pytest.raises(EmptyFieldError):
            render_descriptor_prompt("")

    def test_descriptor_prompt_multiword(self):
        out = render_descriptor_prompt("lenten rose")
        assert "distinguishing a lenten rose in a photo?" in out


def lex(synonyms, descriptors, name=None):
    return ClassLexicon.build(name or synonyms[0], "things", synonyms, descriptors)


class TestCombine:
    def test_figure_example(self):
        texts = combine(lex(["sunflower"], ["a large, daisy-like flower"])).texts
        assert texts == ("A photo of a sunflower, which is a large, daisy-like flower.",)

    def test_leading_verb_spliced(self):
        texts = combine(lex(["sunflower"], ["has large yellow petals"])).texts
        assert texts == ("A photo of a sunflower, which has large yellow petals.",)

    def test_leading_is_kept(self):
        texts = combine(lex(["sunflower"], ["is a tall plant"])).texts
        assert texts == ("A photo of a sunflower, which is a tall plant.",)

    def test_empty_descriptors_fallback(self):
        texts = combine(lex(["x"], [])).texts
        assert texts == ("A photo of a x.",)

    def test_product_order_synonym_major(self):
        synonyms = ["alpha", "beta", "gamma"]
        descriptors = ["d one", "d two", "d three", "d four"]
        texts = combine(lex(synonyms, descriptors)).texts
        assert len(texts) == 12
        expected = tuple(
            f"A photo of a {s}, which is {d}." for s in synonyms for d in descriptors
        )
        assert texts == expected

    def test_deterministic(self):
        lexicon = lex(["alpha", "beta"], ["d one", "has d two"])
        assert combine(lexicon).texts == combine(lexicon).texts

    @settings(max_examples=50, deadline=None)
    @given(
        syn_count=st.integers(min_value=1, max_value=6),
        desc_count=st.integers(min_value=0, max_value=6),
    )
    def test_counting_property(self, syn_count, desc_count):
        synonyms = [f"syn{i}" for i in range(syn_count)]
        descriptors = [f"desc {i}" for i in range(desc_count)]
        lexicon = ClassLexicon.build("syn0", "ds", synonyms, descriptors)
        texts = combine(lexicon).texts
        assert len(texts) == syn_count * max(1, desc_count)

    def test_synonym_occurs_once_at_template_position(self):
        synonyms = ["qqq", "www"]
        descriptors = ["rrr sss", "ttt"]
        for text in combine(lex(synonyms, descriptors)).texts:
            hits = [s for s in synonyms if s in text]
            assert len(hits) == 1
            assert text.startswith(f"A photo of a {hits[0]}, which ")
            assert text.count(hits[0]) == 1


class TestLexicon:
    def test_class_name_injected(self):
        lexicon = ClassLexicon.build("rose", "flowers", ["hellebore"], [])
        assert lexicon.synonyms[0] == "rose"
        assert "hellebore" in lexicon.synonyms

    def test_dedup_case_insensitive(self):
        lexicon = ClassLexicon.build("rose", "flowers", ["Rose", "ROSE", "thorn"], [])
        assert lexicon.synonyms == ("Rose", "thorn")

    def test_blank_entries_dropped(self):
        lexicon = ClassLexicon.build("rose", "flowers", ["rose", " ", ""], ["  "])
        assert lexicon.synonyms == ("rose",)
        assert lexicon.descriptors == ()

    def test_cache_round_trip(self, tmp_path):
        lexicons = {
            0: ClassLexicon.build("cat", "pets", ["cat", "kitty"], ["has whiskers"]),
            1: ClassLexicon.build("dog", "pets", ["dog"], ["is loyal"]),
        }
        path = tmp_path / "lex.json"
        save_lexicon_cache(lexicons, path)
        loaded = load_lexicon_cache(path, dataset_name="pets")
        assert loaded[0].class_name == "cat"
        assert loaded[0].synonyms == ("cat", "kitty")
        assert loaded[1].descriptors == ("is loyal",)
        assert loaded[1].dataset_name == "pets"

    def test_cache_rejects_non_object(self, tmp_path):
        path = tmp_path / "lex.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(FormatError):
            load_lexicon_cache(path)


class TestParseCandidates:
    def test_lines(self):
        assert parse_candidates("alpha\nbeta\n") == ["alpha", "beta"]

    def test_single_comma_line(self):
        assert parse_candidates("alpha, beta, gamma") == ["alpha", "beta", "gamma"]

    def test_numbering_stripped(self):
        assert parse_candidates("1. alpha\n2) beta\n- gamma") == ["alpha", "beta", "gamma"]


class _StubHandler(BaseHTTPRequestHandler):
    script = []  # list of (status, headers, body)
    hits = 0

    def do_POST(self):
        cls = type(self)
        cls.hits += 1
        length = int(self.headers.get("Content-Length", 0))
        self.rfile.read(length)
        status, headers, body = cls.script[min(cls.hits - 1, len(cls.script) - 1)]
        self.send_response(status)
        for k, v in headers.items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body.encode("utf-8"))

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.hits = 0
    yield f"http://127.0.0.1:{server.server_port}", _StubHandler
    server.shutdown()


def ok(body_text: str):
    return (200, {"Content-Type": "application/json"}, json.dumps({"text": body_text}))


class TestLlmClient:
    def test_fresh_prompt_then_cache_hit(self, tmp_path, stub_server):
        endpoint, handler = stub_server
        handler.script = [ok("alpha\nbeta")]
        cache = tmp_path / "cache.jsonl"
        client = LlmClient(endpoint, cache)
        assert client.query("p1", {}) == ["alpha", "beta"]
        assert handler.hits == 1
        # same prompt, same client: served from cache
        assert client.query("p1", {}) == ["alpha", "beta"]
        assert handler.hits == 1
        # a fresh client re-reads the persisted cache
        client2 = LlmClient(endpoint, cache)
        assert client2.query("p1", {}) == ["alpha", "beta"]
        assert handler.hits == 1

    def test_params_key_the_cache(self, tmp_path, stub_server):
        endpoint, handler = stub_server
        handler.script = [ok("one"), ok("two")]
        client = LlmClient(endpoint, tmp_path / "c.jsonl")
        assert client.query("p", {"temperature": 0.1}) == ["one"]
        assert client.query("p", {"temperature": 0.9}) == ["two"]
        assert handler.hits == 2

    def test_malformed_body_raises_parse_error(self, tmp_path, stub_server):
        endpoint, handler = stub_server
        handler.script = [(200, {}, "this is not json")]
        client = LlmClient(endpoint, tmp_path / "c.jsonl")
        with pytest.raises(ParseError) as excinfo:
            client.query("p", {})
        assert excinfo.value.raw_body == "this is not json"

    def test_rate_limit_retry_honored(self, tmp_path, stub_server):
        endpoint, handler = stub_server
        handler.script = [(429, {"Retry-After": "0.01"}, ""), ok("fine")]
        client = LlmClient(endpoint, tmp_path / "c.jsonl")
        assert client.query("p", {}) == ["fine"]
        assert handler.hits == 2

    def test_persistent_rate_limit_raises(self, tmp_path, stub_server):
        endpoint, handler = stub_server
        handler.script = [(429, {"Retry-After": "0.01"}, "")]
        client = LlmClient(endpoint, tmp_path / "c.jsonl", max_attempts=2)
        with pytest.raises(RateLimitedError):
            client.query("p", {})
        assert handler.hits == 2

    def test_cache_miss_without_endpoint(self, tmp_path):
        client = LlmClient(None, tmp_path / "c.jsonl")
        with pytest.raises(NetworkError):
            client.query("p", {})
