#!/usr/bin/env python3
"""Regenerates tests/data/fixture_vocab.json and tests/data/fixture_merges.txt.

Builds a small byte-level BPE vocabulary in the published GPT-2 file format:
ids 0..255 are the byte alphabet (through the printable byte<->codepoint
table), ids 256.. are merge products in merge order. The merges are trained
greedily on the embedded corpus below. Output is deterministic; rerun only
when the corpus or merge budget changes, and commit the results.
"""

import json
import os

N_MERGES = 480

CORPUS = r"""
import os
import sys
import json
import yaml
from collections import defaultdict

def load_settings(path):
    with open(path) as handle:
        data = json.load(handle)
    return data

def read_lines(filename):
    lines = []
    with open(filename) as source:
        for line in source:
            line = line.rstrip()
            if not line:
                continue
            lines.append(line)
    return lines

def render_page(template_name, context):
    template = lookup_template(template_name)
    return template.format(**context)

def send_response(directory, filename):
    full_path = os.path.join(directory, filename)
    with open(full_path, 'rb') as payload:
        return payload.read()

class RequestHandler:
    def __init__(self, config):
        self.config = config
        self.counter = 0

    def handle(self, request):
        self.counter += 1
        name = request.get('name', 'index')
        values = request.get('values', [])
        total = sum(values)
        return {'name': name, 'total': total, 'count': self.counter}

def process_items(items):
    results = []
    for index, item in enumerate(items):
        if item is None:
            continue
        value = transform(item)
        results.append((index, value))
    return results

def transform(item):
    text = str(item).strip().lower()
    return text.replace(' ', '_')

def main(argv):
    settings = load_settings(argv[1])
    handler = RequestHandler(settings)
    for entry in settings.get('entries', []):
        response = handler.handle(entry)
        print(json.dumps(response))
    return 0

if __name__ == '__main__':
    sys.exit(main(sys.argv))

# common words that appear in comments and docstrings of python files
# the quick brown fox jumps over the lazy dog while the server returns
# a response for each request and the client checks the status of the
# result before writing the output to the file system with the default
# settings for the current user and the configured directory of files
the request was handled and the response was returned to the client
this function reads the file and returns the content as a string value
check that the directory exists before writing the output file there
parse the configuration and select the proper template for the page
return the number of items that were processed by the handler above
"""


def bytes_to_unicode():
    bs = (list(range(ord('!'), ord('~') + 1))
          + list(range(0xA1, 0xAC + 1))
          + list(range(0xAE, 0xFF + 1)))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


def is_letter(ch):
    return ch.isalpha() or (ord(ch) >= 0x80 and not ch.isspace())


def is_digit(ch):
    return '0' <= ch <= '9'


CONTRACTIONS = ("'s", "'t", "'re", "'ve", "'m", "'ll", "'d")


def segment(text):
    """Pre-tokenisation: contractions, space-attached letter/digit/other runs,
    whitespace runs that leave their last space for the following word."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "'":
            hit = next((s for s in CONTRACTIONS if text.startswith(s, i)), None)
            if hit:
                out.append(hit)
                i += len(hit)
                continue
        start = i
        j = i
        if c == ' ' and i + 1 < n and not text[i + 1].isspace():
            j = i + 1
            c = text[j]
        if not c.isspace():
            if is_letter(c):
                pred = is_letter
            elif is_digit(c):
                pred = is_digit
            else:
                pred = lambda ch: not (ch.isspace() or is_letter(ch) or is_digit(ch))
            k = j
            while k < n and pred(text[k]):
                if text[k] == "'" and any(text.startswith(s, k) for s in CONTRACTIONS):
                    break
                k += 1
            out.append(text[start:k])
            i = k
            continue
        k = i
        while k < n and text[k].isspace():
            k += 1
        if k < n and k - i >= 2:
            k -= 1
        elif k < n and k - i == 1 and text[i] == ' ':
            # single space before a word is claimed by the word branch above
            pass
        out.append(text[i:k])
        i = k
    return [t for t in out if t]


def train(corpus, n_merges):
    byte_map = bytes_to_unicode()
    words = defaultdict_int = {}
    for pre in segment(corpus):
        coded = tuple(byte_map[b] for b in pre.encode('utf-8'))
        words[coded] = words.get(coded, 0) + 1
    merges = []
    for _ in range(n_merges):
        pairs = {}
        for word, count in words.items():
            for a, b in zip(word, word[1:]):
                pairs[(a, b)] = pairs.get((a, b), 0) + count
        if not pairs:
            break
        best = max(sorted(pairs), key=lambda p: pairs[p])
        if pairs[best] < 2:
            break
        merges.append(best)
        joined = best[0] + best[1]
        new_words = {}
        for word, count in words.items():
            w = []
            i = 0
            while i < len(word):
                if i + 1 < len(word) and word[i] == best[0] and word[i + 1] == best[1]:
                    w.append(joined)
                    i += 2
                else:
                    w.append(word[i])
                    i += 1
            new_words[tuple(w)] = new_words.get(tuple(w), 0) + count
        words = new_words
    return byte_map, merges


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    out_dir = os.path.join(here, '..', 'tests', 'data')
    os.makedirs(out_dir, exist_ok=True)

    byte_map, merges = train(CORPUS, N_MERGES)
    vocab = {}
    for b in range(256):
        vocab[byte_map[b]] = b
    next_id = 256
    for a, b in merges:
        tok = a + b
        if tok not in vocab:
            vocab[tok] = next_id
            next_id += 1

    with open(os.path.join(out_dir, 'fixture_vocab.json'), 'w', encoding='utf-8') as f:
        json.dump(vocab, f, ensure_ascii=False, separators=(',', ':'))
        f.write('\n')
    with open(os.path.join(out_dir, 'fixture_merges.txt'), 'w', encoding='utf-8') as f:
        f.write('#version: 0.2\n')
        for a, b in merges:
            f.write(f'{a} {b}\n')
    print(f'wrote {len(vocab)} tokens, {len(merges)} merges')


if __name__ == '__main__':
    main()
