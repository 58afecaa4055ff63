// Client-side form rules, mirrored from the server: the tweet limit counts
// whitespace-delimited words (not characters), and a document needs exactly
// ten non-empty hashtags.

export const WORD_LIMIT = 140;
export const HASHTAG_COUNT = 10;

export function wordCount(text: string): number {
  const words = text.trim().split(/\s+/).filter((w) => w.length > 0);
  return words.length;
}

export function validateTweet(text: string, limit: number = WORD_LIMIT): string | null {
  const n = wordCount(text);
  if (n > limit) {
    return `tweet has ${n} words; the limit is ${limit}`;
  }
  return null;
}

export function validateHashtags(tags: string[], required: number = HASHTAG_COUNT): string | null {
  const cleaned = tags.map((t) => t.trim()).filter((t) => t.length > 0);
  if (cleaned.length !== required || tags.length !== required) {
    return `exactly ${required} non-empty hashtags are required (got ${cleaned.length})`;
  }
  return null;
}

export function validateDocument(
  tweet: string,
  tags: string[],
  limit: number = WORD_LIMIT,
  required: number = HASHTAG_COUNT,
): string | null {
  return validateTweet(tweet, limit) ?? validateHashtags(tags, required);
}

export function validateTrialHashtag(tag: string): string | null {
  if (tag.trim().length === 0) {
    return "write one hashtag before submitting";
  }
  return null;
}

/** Split a textarea's content into hashtag entries (one per line or comma). */
export function splitHashtags(text: string): string[] {
  return text
    .split(/[\n,]/)
    .map((t) => t.trim())
    .filter((t) => t.length > 0);
}
