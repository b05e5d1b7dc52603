package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void initialOfEmpty() {
        Calc calc = new Calc();
        assertEquals('a', calc.initial(""));
    }
}
